use crate::confidence::MeanBounds;
use crate::error::Result;
use crate::sampling::{weighted_sample_with, BudgetedOracle, LabeledDraw};
use crate::seed;
use crate::types::{Dataset, QuerySpec};

use super::{
    draw_uniform, importance_distribution, sorted_desc, Diagnostics, EstimatorConfig, Fallback,
    ThresholdResult,
};

/// Largest sampled score whose (reweighted) sample recall is at least `target`.
///
/// Recall only changes at positive scores, so the scan walks positives from
/// the top. `None` when the sample has no positive mass.
pub fn recall_threshold(draws: &[LabeledDraw], target: f64) -> Option<f64> {
    let positives: Vec<LabeledDraw> = sorted_desc(draws).into_iter().filter(|d| d.label).collect();
    let total: f64 = positives.iter().map(|d| d.m).sum();
    if positives.is_empty() || total <= 0.0 {
        return None;
    }
    let mut covered = 0.0;
    let mut i = 0;
    while i < positives.len() {
        let score = positives[i].proxy;
        while i < positives.len() && positives[i].proxy == score {
            covered += positives[i].m;
            i += 1;
        }
        if covered / total >= target {
            return Some(score);
        }
    }
    None
}

/// Inflated sample-level recall target
/// `UB(Z1) / (UB(Z1) + LB(Z2))`, each bound at `delta / 2`, where
/// `Z1 = 1{A >= tau0} O m` and `Z2 = 1{A < tau0} O m` over every draw.
/// Clamped to `[gamma, 1]`.
pub fn inflated_recall_target(
    draws: &[LabeledDraw],
    gamma: f64,
    tau0: f64,
    delta: f64,
    bounds: &mut MeanBounds<'_>,
) -> Result<f64> {
    let above: Vec<f64> = draws
        .iter()
        .map(|d| if d.label && d.proxy >= tau0 { d.m } else { 0.0 })
        .collect();
    let below: Vec<f64> = draws
        .iter()
        .map(|d| if d.label && d.proxy < tau0 { d.m } else { 0.0 })
        .collect();
    let upper = bounds.upper(&above, delta / 2.0)?;
    let lower = bounds.lower(&below, delta / 2.0)?;
    let denom = upper + lower;
    let raw = if denom > 0.0 { upper / denom } else { 1.0 };
    Ok(raw.clamp(gamma, 1.0))
}

fn no_positives(sample: Vec<LabeledDraw>) -> ThresholdResult {
    ThresholdResult {
        tau: 0.0,
        sample,
        diagnostics: Diagnostics {
            fallback: Some(Fallback::NoPositiveSamples),
            ..Default::default()
        },
    }
}

fn corrected(
    sample: Vec<LabeledDraw>,
    gamma: f64,
    delta: f64,
    bounds: &mut MeanBounds<'_>,
) -> Result<ThresholdResult> {
    let Some(tau0) = recall_threshold(&sample, gamma) else {
        return Ok(no_positives(sample));
    };
    let gamma_prime = inflated_recall_target(&sample, gamma, tau0, delta, bounds)?;
    let (tau, fallback) = match recall_threshold(&sample, gamma_prime) {
        Some(tau) => (tau, None),
        None => (0.0, Some(Fallback::RecallUnreachable)),
    };
    Ok(ThresholdResult {
        tau,
        sample,
        diagnostics: Diagnostics {
            gamma_prime: Some(gamma_prime),
            fallback,
            ..Default::default()
        },
    })
}

/// Uniform sample, empirical threshold with no confidence correction.
pub fn tau_u_noci_rt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
) -> Result<ThresholdResult> {
    let gamma = spec.recall_target()?;
    let mut rng = seed::rng_from_seed(spec.seed());
    let sample = draw_uniform(dataset, oracle, spec.budget(), &mut rng)?;
    Ok(match recall_threshold(&sample, gamma) {
        Some(tau) => ThresholdResult {
            tau,
            sample,
            diagnostics: Diagnostics::default(),
        },
        None => no_positives(sample),
    })
}

/// Uniform sample with the confidence-inflated recall target.
pub fn tau_u_ci_rt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ThresholdResult> {
    let gamma = spec.recall_target()?;
    let mut rng = seed::rng_from_seed(spec.seed());
    let sample = draw_uniform(dataset, oracle, spec.budget(), &mut rng)?;
    let mut bounds = MeanBounds {
        method: config.bound_method,
        range: 1.0,
        rng: &mut rng,
    };
    corrected(sample, gamma, spec.delta(), &mut bounds)
}

/// Importance sample over `A(x)^exponent` weights with defensive mixing and
/// the confidence-inflated, reweighted recall target.
pub fn tau_is_ci_rt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ThresholdResult> {
    let gamma = spec.recall_target()?;
    let mut rng = seed::rng_from_seed(spec.seed());
    let dist = importance_distribution(dataset, config);
    let drawn = weighted_sample_with(&dist, spec.budget(), &mut rng);
    let sample = oracle.label_sample(&drawn)?;
    let mut bounds = MeanBounds {
        method: config.bound_method,
        range: dist.max_reweight(),
        rng: &mut rng,
    };
    corrected(sample, gamma, spec.delta(), &mut bounds)
}
