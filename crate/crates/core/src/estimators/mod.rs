//! Threshold estimators for recall-target, precision-target and joint queries.
//!
//! Every estimator draws its sample through a [`BudgetedOracle`], seeds its
//! generator from [`QuerySpec::seed`], and returns the proxy threshold `tau`
//! together with the labeled sample it used. `tau = f64::INFINITY` means
//! "select nothing by threshold".

mod joint;
mod precision;
mod recall;

use serde::{Deserialize, Serialize};

pub use joint::tau_jt;
pub use precision::{
    noci_precision_threshold, tau_is_ci_pt, tau_is_ci_pt_one_stage, tau_u_ci_pt, tau_u_noci_pt,
};
pub use recall::{
    inflated_recall_target, recall_threshold, tau_is_ci_rt, tau_u_ci_rt, tau_u_noci_rt,
};

use crate::confidence::BoundMethod;
use crate::error::{Error, Result};
use crate::sampling::{
    defensive_mix, power_weights, uniform_sample_with, BudgetedOracle, Draw, LabeledDraw,
    WeightDistribution, WeightedSample, DEFAULT_MIX_RATIO,
};
use crate::seed::Rng;
use crate::types::{Dataset, EstimatorKind, QueryKind, QuerySpec};

pub const DEFAULT_STEP: usize = 100;
pub const DEFAULT_WEIGHT_EXPONENT: f64 = 0.5;

/// Tunables shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Spacing `m` of the precision candidate grid.
    pub step: usize,
    /// Share of uniform mass mixed into importance weights.
    pub mix_ratio: f64,
    /// Importance weights are `A(x)^weight_exponent`.
    pub weight_exponent: f64,
    pub bound_method: BoundMethod,
    /// Precision-target importance sampling: spend half the budget bounding
    /// the number of positives and restrict the search to the top of the ranking.
    pub two_stage: bool,
    /// Precision bounds over stage-two draws use raw labels instead of the
    /// reweighted, self-normalized estimate.
    pub raw_label_precision: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            mix_ratio: DEFAULT_MIX_RATIO,
            weight_exponent: DEFAULT_WEIGHT_EXPONENT,
            bound_method: BoundMethod::NormalApprox,
            two_stage: true,
            raw_label_precision: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::InvalidQuery("step must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.weight_exponent) {
            return Err(Error::InvalidQuery(format!(
                "weight_exponent must lie in [0, 1], got {}",
                self.weight_exponent
            )));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::InvalidQuery(format!(
                "mix_ratio must lie in [0, 1], got {}",
                self.mix_ratio
            )));
        }
        if let BoundMethod::Bootstrap { resamples: 0 } = self.bound_method {
            return Err(Error::InvalidQuery(
                "bootstrap needs at least one resample".into(),
            ));
        }
        Ok(())
    }
}

/// Why an estimator returned a fail-safe threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// No sampled positives; the whole dataset is returned.
    NoPositiveSamples,
    /// No threshold reaches the inflated recall target on the sample.
    RecallUnreachable,
    /// No precision candidate passed its test.
    NoCandidate,
    /// The positive-count bound was zero, leaving nothing to search.
    EmptyRestriction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub gamma_prime: Option<f64>,
    pub n_match_ub: Option<f64>,
    /// Size of the top-ranked subset searched by the two-stage estimator.
    pub restricted_size: Option<usize>,
    /// The positive-count bound covered the whole dataset.
    pub degenerate_stage1: bool,
    /// Number of hypothesis tests in the precision grid and their level.
    pub tests: Option<usize>,
    pub test_delta: Option<f64>,
    /// Candidates whose precision bound cleared the target.
    pub candidate_count: Option<usize>,
    pub fallback: Option<Fallback>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub tau: f64,
    /// Every labeled draw, all stages included, in draw order.
    pub sample: Vec<LabeledDraw>,
    pub diagnostics: Diagnostics,
}

impl ThresholdResult {
    pub fn draws(&self) -> usize {
        self.sample.len()
    }
}

/// Dispatches on the query kind and the spec's estimator.
pub fn estimate_threshold(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ThresholdResult> {
    config.validate()?;
    match (spec.kind(), spec.estimator()) {
        (QueryKind::RecallTarget, EstimatorKind::UniformNoCi) => {
            tau_u_noci_rt(dataset, oracle, spec)
        }
        (QueryKind::RecallTarget, EstimatorKind::UniformCi) => {
            tau_u_ci_rt(dataset, oracle, spec, config)
        }
        (QueryKind::RecallTarget, EstimatorKind::ImportanceCi) => {
            tau_is_ci_rt(dataset, oracle, spec, config)
        }
        (QueryKind::PrecisionTarget, EstimatorKind::UniformNoCi) => {
            tau_u_noci_pt(dataset, oracle, spec)
        }
        (QueryKind::PrecisionTarget, EstimatorKind::UniformCi) => {
            tau_u_ci_pt(dataset, oracle, spec, config)
        }
        (QueryKind::PrecisionTarget, EstimatorKind::ImportanceCi) => {
            if config.two_stage {
                tau_is_ci_pt(dataset, oracle, spec, config)
            } else {
                tau_is_ci_pt_one_stage(dataset, oracle, spec, config)
            }
        }
        (QueryKind::JointTarget, _) => Err(Error::InvalidQuery(
            "joint-target queries return a result set; use tau_jt or run_query".into(),
        )),
    }
}

fn draw_uniform(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<LabeledDraw>> {
    let entries = uniform_sample_with(dataset.len(), n, rng)
        .into_iter()
        .map(|position| Draw { position, m: 1.0 })
        .collect();
    oracle.label_sample(&WeightedSample { entries })
}

fn importance_distribution(dataset: &Dataset, config: &EstimatorConfig) -> WeightDistribution {
    defensive_mix(
        &power_weights(dataset, config.weight_exponent),
        config.mix_ratio,
    )
}

/// Sorts draws by descending proxy score (stable, so equal scores keep draw order).
fn sorted_desc(draws: &[LabeledDraw]) -> Vec<LabeledDraw> {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| b.proxy.total_cmp(&a.proxy));
    sorted
}
