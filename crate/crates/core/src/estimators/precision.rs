use crate::confidence::{BoundMethod, MeanBounds, SampleStats};
use crate::error::{Error, Result};
use crate::sampling::{weighted_sample_with, BudgetedOracle, LabeledDraw};
use crate::seed;
use crate::types::{Dataset, QuerySpec};

use super::{
    draw_uniform, importance_distribution, sorted_desc, Diagnostics, EstimatorConfig, Fallback,
    ThresholdResult,
};

/// Smallest sampled score whose (reweighted) sample precision is at least `gamma`.
pub fn noci_precision_threshold(draws: &[LabeledDraw], gamma: f64) -> Option<f64> {
    let sorted = sorted_desc(draws);
    let (mut hit, mut selected) = (0.0, 0.0);
    let mut best = None;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].proxy;
        while i < sorted.len() && sorted[i].proxy == score {
            selected += sorted[i].m;
            if sorted[i].label {
                hit += sorted[i].m;
            }
            i += 1;
        }
        if selected > 0.0 && hit / selected >= gamma {
            best = Some(score);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PrecisionEstimate {
    /// Plain mean of the selected draws' labels.
    Labels,
    /// `Σ O m / Σ m` over the selected draws.
    SelfNormalized,
}

fn precision_lower_bound(
    selected: &[LabeledDraw],
    estimate: PrecisionEstimate,
    delta: f64,
    bounds: &mut MeanBounds<'_>,
) -> Result<f64> {
    let labels: Vec<f64> = selected
        .iter()
        .map(|d| f64::from(u8::from(d.label)))
        .collect();
    match estimate {
        PrecisionEstimate::Labels => bounds.lower(&labels, delta),
        PrecisionEstimate::SelfNormalized => {
            if bounds.method != BoundMethod::NormalApprox {
                return Err(Error::UnsupportedBound {
                    method: bounds.method.name(),
                    reason: "reweighted precision bounds use the normal approximation",
                });
            }
            let weights: Vec<f64> = selected.iter().map(|d| d.m).collect();
            let stats = SampleStats::self_normalized(&labels, &weights)
                .ok_or(Error::EmptySelection { tau: f64::NAN })?;
            Ok(stats.lb(delta))
        }
    }
}

struct GridSearch {
    tests: usize,
    test_delta: f64,
    best: Option<f64>,
    passing: usize,
}

/// Tests each candidate threshold at level `test_delta` and keeps the
/// smallest one whose precision lower bound exceeds `gamma`.
fn search_grid(
    sorted: &[LabeledDraw],
    candidates: &[f64],
    tests: usize,
    gamma: f64,
    test_delta: f64,
    estimate: PrecisionEstimate,
    bounds: &mut MeanBounds<'_>,
) -> Result<GridSearch> {
    let mut best: Option<f64> = None;
    let mut passing = 0;
    for &tau in candidates {
        let n = sorted.partition_point(|d| d.proxy >= tau);
        let p_lower = precision_lower_bound(&sorted[..n], estimate, test_delta, bounds)?;
        if p_lower > gamma {
            passing += 1;
            best = Some(best.map_or(tau, |b| b.min(tau)));
        }
    }
    Ok(GridSearch {
        tests,
        test_delta,
        best,
        passing,
    })
}

/// Scores at ascending sorted positions `step, 2 step, ...` (1-based).
fn ascending_grid(sorted_desc: &[LabeledDraw], step: usize) -> Vec<f64> {
    let n = sorted_desc.len();
    (step..=n)
        .step_by(step)
        .map(|i| sorted_desc[n - i].proxy)
        .collect()
}

/// Scores at descending sorted positions `step, 2 step, ...` (1-based).
fn descending_grid(sorted_desc: &[LabeledDraw], step: usize) -> Vec<f64> {
    (step..=sorted_desc.len())
        .step_by(step)
        .map(|i| sorted_desc[i - 1].proxy)
        .collect()
}

fn finish(
    sample: Vec<LabeledDraw>,
    search: GridSearch,
    mut diagnostics: Diagnostics,
) -> ThresholdResult {
    diagnostics.tests = Some(search.tests);
    diagnostics.test_delta = Some(search.test_delta);
    diagnostics.candidate_count = Some(search.passing);
    let tau = match search.best {
        Some(tau) => tau,
        None => {
            diagnostics.fallback = Some(Fallback::NoCandidate);
            f64::INFINITY
        }
    };
    ThresholdResult {
        tau,
        sample,
        diagnostics,
    }
}

/// Uniform sample, smallest sampled score meeting the target empirically.
pub fn tau_u_noci_pt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
) -> Result<ThresholdResult> {
    let gamma = spec.precision_target()?;
    let mut rng = seed::rng_from_seed(spec.seed());
    let sample = draw_uniform(dataset, oracle, spec.budget(), &mut rng)?;
    let mut diagnostics = Diagnostics::default();
    let tau = noci_precision_threshold(&sample, gamma).unwrap_or_else(|| {
        diagnostics.fallback = Some(Fallback::NoCandidate);
        f64::INFINITY
    });
    Ok(ThresholdResult {
        tau,
        sample,
        diagnostics,
    })
}

/// Uniform sample; candidates every `step` sorted positions, each tested at
/// `delta / M` with `M = ceil(s / step)`.
pub fn tau_u_ci_pt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ThresholdResult> {
    let gamma = spec.precision_target()?;
    let s = spec.budget();
    let mut rng = seed::rng_from_seed(spec.seed());
    let sample = draw_uniform(dataset, oracle, s, &mut rng)?;
    let sorted = sorted_desc(&sample);
    let tests = s.div_ceil(config.step);
    let candidates = ascending_grid(&sorted, config.step);
    let mut bounds = MeanBounds {
        method: config.bound_method,
        range: 1.0,
        rng: &mut rng,
    };
    let search = search_grid(
        &sorted,
        &candidates,
        tests,
        gamma,
        spec.delta() / tests as f64,
        PrecisionEstimate::Labels,
        &mut bounds,
    )?;
    Ok(finish(sample, search, Diagnostics::default()))
}

fn weighted_estimate(config: &EstimatorConfig) -> PrecisionEstimate {
    if config.raw_label_precision {
        PrecisionEstimate::Labels
    } else {
        PrecisionEstimate::SelfNormalized
    }
}

/// Importance sample over the whole dataset with the candidate search of the
/// second stage of [`tau_is_ci_pt`], tested at `delta / M`.
pub fn tau_is_ci_pt_one_stage(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ThresholdResult> {
    let gamma = spec.precision_target()?;
    let s = spec.budget();
    let mut rng = seed::rng_from_seed(spec.seed());
    let dist = importance_distribution(dataset, config);
    let sample = oracle.label_sample(&weighted_sample_with(&dist, s, &mut rng))?;
    let sorted = sorted_desc(&sample);
    let tests = s.div_ceil(config.step);
    let candidates = descending_grid(&sorted, config.step);
    let mut bounds = MeanBounds {
        method: config.bound_method,
        range: dist.max_reweight(),
        rng: &mut rng,
    };
    let search = search_grid(
        &sorted,
        &candidates,
        tests,
        gamma,
        spec.delta() / tests as f64,
        weighted_estimate(config),
        &mut bounds,
    )?;
    Ok(finish(sample, search, Diagnostics::default()))
}

/// Two-stage importance sampling for precision targets.
///
/// Stage one spends `s/2` draws on an upper bound `n_match` for the number
/// of positives (level `delta/2`); only the top `ceil(n_match / gamma)`
/// records can reach precision `gamma`. Stage two importance-samples the
/// remaining budget from that prefix, with weights restricted and
/// renormalized, and tests every `step`-th descending sampled score at
/// `delta / (2M)`, `M = ceil((s/2) / step)`.
pub fn tau_is_ci_pt(
    dataset: &Dataset,
    oracle: &mut BudgetedOracle<'_>,
    spec: &QuerySpec,
    config: &EstimatorConfig,
) -> Result<ThresholdResult> {
    let gamma = spec.precision_target()?;
    let s = spec.budget();
    let (n1, n2) = (s / 2, s - s / 2);
    let delta = spec.delta();
    let mut rng = seed::rng_from_seed(spec.seed());
    let dist = importance_distribution(dataset, config);

    let mut sample = oracle.label_sample(&weighted_sample_with(&dist, n1, &mut rng))?;
    let z: Vec<f64> = sample
        .iter()
        .map(|d| if d.label { d.m } else { 0.0 })
        .collect();
    let n_match = {
        let mut bounds = MeanBounds {
            method: config.bound_method,
            range: dist.max_reweight(),
            rng: &mut rng,
        };
        dataset.len() as f64 * bounds.upper(&z, delta / 2.0)?
    };
    let mut diagnostics = Diagnostics {
        n_match_ub: Some(n_match),
        ..Default::default()
    };

    let keep = (n_match / gamma).ceil();
    if keep < 1.0 {
        diagnostics.restricted_size = Some(0);
        diagnostics.fallback = Some(Fallback::EmptyRestriction);
        return Ok(ThresholdResult {
            tau: f64::INFINITY,
            sample,
            diagnostics,
        });
    }
    let restricted: &[usize] = if keep >= dataset.len() as f64 {
        diagnostics.degenerate_stage1 = true;
        dataset.by_score_desc()
    } else {
        let cutoff = dataset
            .record(dataset.by_score_desc()[keep as usize - 1])
            .proxy();
        dataset.select(cutoff)
    };
    diagnostics.restricted_size = Some(restricted.len());

    let sub = dist.restrict(restricted);
    let stage_two = oracle.label_sample(&weighted_sample_with(&sub, n2, &mut rng))?;
    let sorted = sorted_desc(&stage_two);
    let tests = n2.div_ceil(config.step);
    let candidates = descending_grid(&sorted, config.step);
    let mut bounds = MeanBounds {
        method: config.bound_method,
        range: sub.max_reweight(),
        rng: &mut rng,
    };
    let search = search_grid(
        &sorted,
        &candidates,
        tests,
        gamma,
        delta / (2.0 * tests as f64),
        weighted_estimate(config),
        &mut bounds,
    )?;
    sample.extend(stage_two);
    Ok(finish(sample, search, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::empirical_precision;
    use crate::types::{EstimatorKind, Record};
    use proptest::prelude::*;

    fn unit(scores: &[f64], labels: &[bool]) -> Vec<LabeledDraw> {
        (0..scores.len())
            .map(|i| LabeledDraw {
                position: i,
                proxy: scores[i],
                label: labels[i],
                m: 1.0,
            })
            .collect()
    }

    #[test]
    fn noci_examples() {
        let s = unit(&[0.9, 0.7, 0.4], &[true, true, false]);
        assert_eq!(noci_precision_threshold(&s, 0.9), Some(0.7));
        assert_eq!(noci_precision_threshold(&s, 1e-9), Some(0.4));
        let zeros = unit(&[0.9, 0.7, 0.4], &[false; 3]);
        assert_eq!(noci_precision_threshold(&zeros, 0.5), None);
    }

    #[test]
    fn grids_follow_sorted_positions() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let sorted = sorted_desc(&unit(&scores, &[true; 10]));
        assert_eq!(ascending_grid(&sorted, 3), vec![0.2, 0.5, 0.8]);
        assert_eq!(descending_grid(&sorted, 3), vec![0.7, 0.4, 0.1]);
    }

    fn dataset(n: usize, label: impl Fn(usize) -> bool) -> Dataset {
        let recs = (0..n)
            .map(|i| Record::labeled(i as u64, (i as f64 + 0.5) / n as f64, label(i)).unwrap())
            .collect();
        Dataset::new(recs).unwrap()
    }

    #[test]
    fn all_positive_sample_passes_every_candidate() {
        let d = dataset(1000, |_| true);
        let spec = QuerySpec::precision(0.95, 200, 0.05, EstimatorKind::UniformCi).unwrap();
        let mut o = BudgetedOracle::new(&d, 200);
        let r = tau_u_ci_pt(&d, &mut o, &spec, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.diagnostics.tests, Some(2));
        // The top candidate keeps a single draw (sd 0.5), the other keeps all.
        assert!(r.diagnostics.candidate_count.unwrap() >= 1);
        let min_score = r
            .sample
            .iter()
            .map(|d| d.proxy)
            .fold(f64::INFINITY, f64::min);
        let nth = {
            let mut v: Vec<f64> = r.sample.iter().map(|d| d.proxy).collect();
            v.sort_by(f64::total_cmp);
            v[99]
        };
        assert!(r.tau == nth && r.tau >= min_score);
    }

    #[test]
    fn all_negative_sample_has_no_candidate() {
        let d = dataset(1000, |_| false);
        let spec = QuerySpec::precision(0.5, 300, 0.05, EstimatorKind::UniformCi).unwrap();
        for f in [tau_u_ci_pt, tau_is_ci_pt_one_stage] {
            let mut o = BudgetedOracle::new(&d, 300);
            let r = f(&d, &mut o, &spec, &EstimatorConfig::default()).unwrap();
            assert_eq!(r.tau, f64::INFINITY);
        }
        let mut o = BudgetedOracle::new(&d, 300);
        assert_eq!(tau_u_noci_pt(&d, &mut o, &spec).unwrap().tau, f64::INFINITY);
    }

    #[test]
    fn union_bound_levels() {
        let d = dataset(5000, |i| i % 2 == 0);
        let spec = QuerySpec::precision(0.4, 1000, 0.05, EstimatorKind::UniformCi).unwrap();
        let mut o = BudgetedOracle::new(&d, 1000);
        let r = tau_u_ci_pt(&d, &mut o, &spec, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.diagnostics.tests, Some(10));
        assert!((r.diagnostics.test_delta.unwrap() - 0.005).abs() < 1e-15);

        let mut o = BudgetedOracle::new(&d, 1000);
        let r = tau_is_ci_pt(&d, &mut o, &spec, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.diagnostics.tests, Some(5));
        assert!((r.diagnostics.test_delta.unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn no_stage_one_positives_returns_sentinel() {
        let d = dataset(2000, |_| false);
        let spec = QuerySpec::precision(0.9, 400, 0.05, EstimatorKind::ImportanceCi).unwrap();
        let mut o = BudgetedOracle::new(&d, 400);
        let r = tau_is_ci_pt(&d, &mut o, &spec, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.diagnostics.n_match_ub, Some(0.0));
        assert_eq!(r.diagnostics.fallback, Some(Fallback::EmptyRestriction));
        assert_eq!(r.tau, f64::INFINITY);
        assert_eq!(r.sample.len(), 200);
    }

    #[test]
    fn vacuous_restriction_reduces_to_weighted_search_on_dataset() {
        let d = dataset(2000, |_| true);
        let spec = QuerySpec::precision(0.9, 400, 0.05, EstimatorKind::ImportanceCi)
            .unwrap()
            .with_seed(11);
        let config = EstimatorConfig::default();
        let mut o = BudgetedOracle::new(&d, 400);
        let r = tau_is_ci_pt(&d, &mut o, &spec, &config).unwrap();
        assert!(r.diagnostics.degenerate_stage1);
        assert_eq!(r.diagnostics.restricted_size, Some(2000));

        // Replay: same generator stream, stage two drawn on all of D.
        let mut rng = seed::rng_from_seed(11);
        let dist = importance_distribution(&d, &config);
        // The stage-one normal bound consumes no randomness.
        let _stage_one = weighted_sample_with(&dist, 200, &mut rng);
        let sub = dist.restrict(d.by_score_desc());
        let mut o = BudgetedOracle::new(&d, 400);
        let two = o
            .label_sample(&weighted_sample_with(&sub, 200, &mut rng))
            .unwrap();
        let sorted = sorted_desc(&two);
        let mut bounds = MeanBounds {
            method: config.bound_method,
            range: 1.0,
            rng: &mut rng,
        };
        let search = search_grid(
            &sorted,
            &descending_grid(&sorted, 100),
            2,
            0.9,
            0.05 / 4.0,
            PrecisionEstimate::SelfNormalized,
            &mut bounds,
        )
        .unwrap();
        assert_eq!(search.best, Some(r.tau));
    }

    #[test]
    fn weighted_precision_rejects_non_normal_bounds() {
        let d = dataset(1000, |i| i > 500);
        let spec = QuerySpec::precision(0.6, 200, 0.05, EstimatorKind::ImportanceCi).unwrap();
        let config = EstimatorConfig {
            bound_method: BoundMethod::Hoeffding,
            two_stage: false,
            ..Default::default()
        };
        let mut o = BudgetedOracle::new(&d, 200);
        assert!(matches!(
            tau_is_ci_pt_one_stage(&d, &mut o, &spec, &config),
            Err(Error::UnsupportedBound { .. })
        ));
        let literal = EstimatorConfig {
            raw_label_precision: true,
            ..config
        };
        let mut o = BudgetedOracle::new(&d, 200);
        assert!(tau_is_ci_pt_one_stage(&d, &mut o, &spec, &literal).is_ok());
    }

    proptest! {
        #[test]
        fn noci_matches_brute_force(
            rows in prop::collection::vec((0u8..15, any::<bool>()), 1..60),
            gamma in 0.01f64..=1.0,
        ) {
            let scores: Vec<f64> = rows.iter().map(|r| f64::from(r.0) / 15.0).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let plain: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
            let brute = scores
                .iter()
                .copied()
                .filter(|&t| empirical_precision(&plain, t).is_ok_and(|p| p >= gamma))
                .min_by(f64::total_cmp);
            let fast = noci_precision_threshold(&unit(&scores, &labels), gamma);
            // Summation order matches here (unit weights are exact integers).
            prop_assert_eq!(fast, brute);
        }
    }
}
