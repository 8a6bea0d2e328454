use crate::error::{Error, Result};
use crate::sampling::BudgetedOracle;
use crate::types::{Dataset, EstimatorKind, JointCalls, QuerySpec, ResultSet, Target};

use super::{tau_is_ci_rt, tau_u_ci_rt, tau_u_noci_rt, EstimatorConfig};

/// Joint precision/recall target.
///
/// Runs the spec's recall-target estimator with the spec budget at
/// `delta / 2` to reach `gamma_r`, then lifts the budget and labels every
/// thresholded record, keeping only positives. The returned set has
/// precision 1 and the recall of the thresholded set.
pub fn tau_jt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ResultSet> {
    let Target::Joint { recall, .. } = spec.target() else {
        return Err(Error::InvalidQuery("tau_jt requires a joint target".into()));
    };
    let rt_spec = QuerySpec::new(
        Target::Recall(recall),
        spec.budget(),
        spec.delta() / 2.0,
        spec.estimator(),
        spec.seed(),
    )?;
    let threshold = match spec.estimator() {
        EstimatorKind::ImportanceCi => tau_is_ci_rt(dataset, oracle, &rt_spec, config)?,
        EstimatorKind::UniformCi => tau_u_ci_rt(dataset, oracle, &rt_spec, config)?,
        EstimatorKind::UniformNoCi => tau_u_noci_rt(dataset, oracle, &rt_spec)?,
    };
    let threshold_calls = oracle.used();

    oracle.lift_budget();
    let mut members: Vec<usize> = threshold
        .sample
        .iter()
        .filter(|d| d.label)
        .map(|d| d.position)
        .collect();
    let thresholded = dataset.select(threshold.tau);
    for &pos in thresholded {
        if oracle.label(pos)? {
            members.push(pos);
        }
    }
    let filter_calls = oracle.used() - threshold_calls;

    let mut result = ResultSet::from_positions(members, threshold.tau, oracle.used());
    result.draws = threshold.draws();
    result.threshold_selected = thresholded.len();
    result.joint = Some(JointCalls {
        threshold_calls,
        filter_calls,
    });
    Ok(result)
}
