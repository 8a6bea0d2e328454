//! Top-level query execution: sample, pick a threshold, return
//! `R1 ∪ R2` where `R1` holds the sampled positives and `R2 = D(tau)`.

use crate::error::Result;
use crate::estimators::{estimate_threshold, tau_jt, EstimatorConfig, ThresholdResult};
use crate::sampling::BudgetedOracle;
use crate::types::{Dataset, QueryKind, QuerySpec, ResultSet};

/// Unions the sampled positives with every record scoring at or above `tau`.
pub fn assemble(dataset: &Dataset, threshold: &ThresholdResult, oracle_calls: usize) -> ResultSet {
    let thresholded = dataset.select(threshold.tau);
    let mut members: Vec<usize> = thresholded.to_vec();
    members.extend(
        threshold
            .sample
            .iter()
            .filter(|d| d.label && d.proxy < threshold.tau)
            .map(|d| d.position),
    );
    let mut result = ResultSet::from_positions(members, threshold.tau, oracle_calls);
    result.draws = threshold.draws();
    result.threshold_selected = thresholded.len();
    result
}

/// Runs one query against `dataset`, drawing labels through `oracle`.
///
/// Deterministic given the spec's seed.
pub fn run_query(
    dataset: &Dataset,
    spec: &QuerySpec,
    config: &EstimatorConfig,
    oracle: &mut BudgetedOracle<'_>,
) -> Result<ResultSet> {
    config.validate()?;
    if spec.kind() == QueryKind::JointTarget {
        return tau_jt(dataset, oracle, spec, config);
    }
    let threshold = estimate_threshold(dataset, oracle, spec, config)?;
    Ok(assemble(dataset, &threshold, oracle.used()))
}
