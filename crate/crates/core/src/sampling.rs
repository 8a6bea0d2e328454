//! Uniform and importance sampling with replacement, proxy-derived weights
//! with defensive mixing, and budget-enforced oracle access.

use std::collections::HashMap;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::types::Dataset;

pub const DEFAULT_MIX_RATIO: f64 = 0.1;

/// Sampling probabilities over a support of dataset positions.
///
/// The base (uniform) distribution is uniform over the same support, so a
/// draw of support member `x` carries `m(x) = (1/|support|) / w(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDistribution {
    support: Vec<usize>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WeightDistribution {
    fn build(support: Vec<usize>, probs: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            support,
            probs,
            cumulative,
        }
    }

    /// Uniform distribution over `n` positions.
    pub fn uniform(n: usize) -> Self {
        Self::build((0..n).collect(), vec![1.0 / n as f64; n])
    }

    /// Distribution over positions `0..probs.len()`; probabilities must be
    /// nonnegative and sum to one within `1e-9`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidQuery("empty weight distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidQuery(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidQuery(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self::build((0..probs.len()).collect(), probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Reweighting factor for the `i`-th support member.
    pub fn reweight(&self, i: usize) -> f64 {
        (1.0 / self.probs.len() as f64) / self.probs[i]
    }

    /// Largest finite reweighting factor over the support.
    pub fn max_reweight(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .fold(0.0f64, |acc, &p| {
                acc.max(1.0 / (self.probs.len() as f64 * p))
            })
    }

    /// Restricts to the given support members (local indices into this
    /// distribution) and renormalizes. Members with zero total mass fall back
    /// to uniform over the restriction.
    pub fn restrict(&self, members: &[usize]) -> Self {
        let support: Vec<usize> = members.iter().map(|&i| self.support[i]).collect();
        let mass: f64 = members.iter().map(|&i| self.probs[i]).sum();
        if mass <= 0.0 {
            let n = members.len();
            return Self::build(support, vec![1.0 / n as f64; n]);
        }
        let probs = members.iter().map(|&i| self.probs[i] / mass).collect();
        Self::build(support, probs)
    }

    /// Local index drawn by inverse-CDF lookup on the prefix sums.
    fn draw_index(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.probs.len() - 1)
    }
}

/// `sqrt(A(x))` for each record, unnormalized.
pub fn sqrt_weights(dataset: &Dataset) -> Vec<f64> {
    dataset.records().iter().map(|r| r.proxy().sqrt()).collect()
}

/// `A(x)^exponent` for each record; exponent 0.5 is routed through `sqrt`.
pub fn power_weights(dataset: &Dataset, exponent: f64) -> Vec<f64> {
    if exponent == 0.5 {
        return sqrt_weights(dataset);
    }
    dataset
        .records()
        .iter()
        .map(|r| r.proxy().powf(exponent))
        .collect()
}

/// `(1 - ratio) * raw / ||raw||_1 + ratio / n`.
///
/// All-zero raw weights are treated as uniform.
pub fn defensive_mix(raw: &[f64], mix_ratio: f64) -> WeightDistribution {
    let n = raw.len();
    let uniform = 1.0 / n as f64;
    let total: f64 = raw.iter().sum();
    let probs = if total > 0.0 {
        raw.iter()
            .map(|w| (1.0 - mix_ratio) * (w / total) + mix_ratio * uniform)
            .collect()
    } else {
        vec![uniform; n]
    };
    WeightDistribution::build((0..n).collect(), probs)
}

/// One draw of a sample: dataset position and reweighting factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub position: usize,
    pub m: f64,
}

/// Draws taken with replacement, in draw order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedSample {
    pub entries: Vec<Draw>,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A draw whose oracle label has been revealed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledDraw {
    pub position: usize,
    pub proxy: f64,
    pub label: bool,
    pub m: f64,
}

/// `n` equiprobable draws with replacement.
pub fn uniform_sample(dataset: &Dataset, n: usize, seed: u64) -> Vec<usize> {
    uniform_sample_with(dataset.len(), n, &mut seed::rng_from_seed(seed))
}

pub fn uniform_sample_with(size: usize, n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..size)).collect()
}

/// `n` draws with replacement from `dist`, each carrying its reweighting factor.
pub fn weighted_sample(dist: &WeightDistribution, n: usize, seed: u64) -> WeightedSample {
    weighted_sample_with(dist, n, &mut seed::rng_from_seed(seed))
}

pub fn weighted_sample_with(dist: &WeightDistribution, n: usize, rng: &mut Rng) -> WeightedSample {
    let entries = (0..n)
        .map(|_| {
            let i = dist.draw_index(rng);
            Draw {
                position: dist.support[i],
                m: dist.reweight(i),
            }
        })
        .collect();
    WeightedSample { entries }
}

/// Oracle access limited to `budget` distinct records.
///
/// Repeated requests for a record are served from the cache and do not
/// consume budget.
#[derive(Debug, Clone)]
pub struct BudgetedOracle<'a> {
    dataset: &'a Dataset,
    budget: usize,
    /// Cap that survives [`BudgetedOracle::lift_budget`].
    hard_limit: Option<usize>,
    used: usize,
    cache: HashMap<usize, bool>,
}

impl<'a> BudgetedOracle<'a> {
    pub fn new(dataset: &'a Dataset, budget: usize) -> Self {
        Self {
            dataset,
            budget,
            hard_limit: None,
            used: 0,
            cache: HashMap::new(),
        }
    }

    /// Caps distinct oracle calls at `limit` even after the budget is lifted.
    pub fn with_hard_limit(mut self, limit: usize) -> Self {
        self.hard_limit = Some(limit);
        self
    }

    /// Effective call limit.
    pub fn budget(&self) -> usize {
        self.hard_limit.map_or(self.budget, |h| h.min(self.budget))
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.budget().saturating_sub(self.used)
    }

    /// Removes the call limit; used where a query may label without bound.
    pub fn lift_budget(&mut self) {
        self.budget = usize::MAX;
    }

    pub fn is_revealed(&self, position: usize) -> bool {
        self.cache.contains_key(&position)
    }

    /// Label of the record at `position`, invoking the oracle on first request.
    pub fn label(&mut self, position: usize) -> Result<bool> {
        if let Some(&label) = self.cache.get(&position) {
            return Ok(label);
        }
        if self.used >= self.budget() {
            return Err(Error::BudgetExhausted {
                budget: self.budget(),
            });
        }
        let label = self.dataset.truth(position)?;
        self.used += 1;
        self.cache.insert(position, label);
        Ok(label)
    }

    pub fn label_id(&mut self, id: u64) -> Result<bool> {
        let position = self
            .dataset
            .position_of(id)
            .ok_or_else(|| Error::InvalidQuery(format!("unknown record id {id}")))?;
        self.label(position)
    }

    /// Reveals labels for every draw of `sample`.
    pub fn label_sample(&mut self, sample: &WeightedSample) -> Result<Vec<LabeledDraw>> {
        sample
            .entries
            .iter()
            .map(|d| {
                Ok(LabeledDraw {
                    position: d.position,
                    proxy: self.dataset.record(d.position).proxy(),
                    label: self.label(d.position)?,
                    m: d.m,
                })
            })
            .collect()
    }
}

/// `V1(w) = Σ a(x) u(x)^2 / w(x)` with `u` uniform, the part of the
/// reweighted estimator's variance that depends on the sampling weights.
/// Terms with `a(x) = 0` contribute nothing.
pub fn second_moment(a: &[f64], w: &[f64]) -> f64 {
    let u = 1.0 / a.len() as f64;
    a.iter()
        .zip(w)
        .filter(|(&ai, _)| ai > 0.0)
        .map(|(&ai, &wi)| ai * u * u / wi)
        .sum()
}

/// Variance of the reweighted estimator of `E_u[f]` for a calibrated proxy:
/// `V1(w) - E_u[a]^2`.
pub fn reweighted_variance(a: &[f64], w: &[f64]) -> f64 {
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    second_moment(a, w) - mean * mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Record;
    use proptest::prelude::*;

    fn dataset(proxies: &[f64]) -> Dataset {
        let recs = proxies
            .iter()
            .enumerate()
            .map(|(i, &p)| Record::labeled(i as u64, p, i % 2 == 0).unwrap())
            .collect();
        Dataset::new(recs).unwrap()
    }

    #[test]
    fn uniform_sample_single_record() {
        let d = dataset(&[0.3]);
        assert_eq!(uniform_sample(&d, 5, 1), vec![0; 5]);
    }

    #[test]
    fn uniform_sample_is_seed_deterministic() {
        let d = dataset(&[0.1; 50]);
        assert_eq!(uniform_sample(&d, 200, 9), uniform_sample(&d, 200, 9));
        assert_ne!(uniform_sample(&d, 200, 9), uniform_sample(&d, 200, 10));
    }

    #[test]
    fn uniform_sample_counts_concentrate() {
        // Binomial(1e5, 0.1): sd ~ 95, so [9000, 11000] is > 10 sd wide.
        let d = dataset(&[0.5; 10]);
        let mut counts = [0usize; 10];
        for p in uniform_sample(&d, 100_000, 2024) {
            counts[p] += 1;
        }
        for c in counts {
            assert!((9_000..=11_000).contains(&c), "count {c}");
        }
    }

    #[test]
    fn sqrt_weight_examples() {
        assert_eq!(sqrt_weights(&dataset(&[0.25, 1.0])), vec![0.5, 1.0]);
        assert_eq!(sqrt_weights(&dataset(&[0.0, 0.0, 0.0])), vec![0.0; 3]);
        assert!((sqrt_weights(&dataset(&[0.01]))[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn defensive_mix_examples() {
        let d = defensive_mix(&[0.3, 0.1], 0.1);
        assert!((d.probs()[0] - 0.725).abs() < 1e-12);
        assert!((d.probs()[1] - 0.275).abs() < 1e-12);

        let d = defensive_mix(&[2.0; 4], 0.3);
        assert!(d.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));

        let d = defensive_mix(&[1.0, 0.0], 0.1);
        assert!((d.probs()[0] - 0.95).abs() < 1e-12);
        assert!((d.probs()[1] - 0.05).abs() < 1e-12);
        assert!((d.reweight(1) - 10.0).abs() < 1e-9);
        assert!((d.max_reweight() - 10.0).abs() < 1e-9);

        let d = defensive_mix(&[0.0, 0.0], 0.1);
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn uniform_distribution_has_unit_reweights() {
        let s = weighted_sample(&WeightDistribution::uniform(7), 100, 3);
        assert!(s.entries.iter().all(|d| d.m == 1.0));
    }

    #[test]
    fn skewed_frequency_matches_probability() {
        // Binomial(1e4, 0.95): sd ~ 0.0022 in frequency.
        let dist = WeightDistribution::from_probs(vec![0.95, 0.05]).unwrap();
        let s = weighted_sample(&dist, 10_000, 77);
        let f = s.entries.iter().filter(|d| d.position == 0).count() as f64 / 1e4;
        assert!((0.93..=0.97).contains(&f), "freq {f}");
    }

    #[test]
    fn zero_probability_is_never_drawn() {
        let dist = WeightDistribution::from_probs(vec![0.5, 0.0, 0.5]).unwrap();
        let s = weighted_sample(&dist, 5000, 5);
        assert!(s.entries.iter().all(|d| d.position != 1));
    }

    #[test]
    fn restriction_renormalizes_over_subset() {
        let dist = defensive_mix(&[0.4, 0.3, 0.2, 0.1], 0.1);
        let sub = dist.restrict(&[0, 2]);
        assert_eq!(sub.support(), &[0, 2]);
        let total: f64 = sub.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let ratio = dist.probs()[0] / dist.probs()[2];
        assert!((sub.probs()[0] / sub.probs()[1] - ratio).abs() < 1e-12);
        // m is relative to uniform over the subset.
        assert!((sub.reweight(0) - 0.5 / sub.probs()[0]).abs() < 1e-12);
    }

    #[test]
    fn oracle_caches_and_enforces_budget() {
        let d = dataset(&[0.1, 0.2, 0.3]);
        let mut o = BudgetedOracle::new(&d, 1);
        assert!(o.label(0).unwrap());
        assert!(o.label(0).unwrap());
        assert_eq!(o.used(), 1);
        assert_eq!(o.label(1), Err(Error::BudgetExhausted { budget: 1 }));

        let mut o = BudgetedOracle::new(&d, 3);
        for p in 0..3 {
            o.label(p).unwrap();
        }
        assert_eq!(o.used(), 3);
        assert_eq!(o.remaining(), 0);
    }

    #[test]
    fn hard_limit_survives_lifting() {
        let d = dataset(&[0.1, 0.2, 0.3]);
        let mut o = BudgetedOracle::new(&d, 1).with_hard_limit(2);
        o.label(0).unwrap();
        assert!(o.label(1).is_err());
        o.lift_budget();
        o.label(1).unwrap();
        assert_eq!(o.label(2), Err(Error::BudgetExhausted { budget: 2 }));
    }

    #[test]
    fn oracle_reports_missing_labels() {
        let d = Dataset::new(vec![Record::new(5, 0.2, None).unwrap()]).unwrap();
        let mut o = BudgetedOracle::new(&d, 10);
        assert_eq!(o.label(0), Err(Error::MissingLabel { id: 5 }));
        assert_eq!(o.used(), 0);
    }

    #[test]
    fn variance_functional_worked_vector() {
        let a = [1.0, 0.25, 0.25, 0.25];
        let n = a.len() as f64;
        let norm = |w: Vec<f64>| {
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect::<Vec<_>>()
        };
        let sqrt_w = norm(a.iter().map(|x: &f64| x.sqrt()).collect());
        let prop_w = norm(a.to_vec());
        let unif_w = vec![1.0 / n; 4];
        assert!((second_moment(&a, &sqrt_w) - 0.390625).abs() < 1e-15);
        assert!((second_moment(&a, &prop_w) - 0.4375).abs() < 1e-15);
        assert!((second_moment(&a, &unif_w) - 0.4375).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn min_probability_after_mixing(
            raw in prop::collection::vec(0.0f64..1.0, 1..60),
            ratio in 0.0f64..0.5,
        ) {
            let dist = defensive_mix(&raw, ratio);
            let floor = ratio / raw.len() as f64;
            let total: f64 = dist.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for &p in dist.probs() {
                prop_assert!(p >= floor * (1.0 - 1e-12));
            }
        }

        #[test]
        fn horvitz_identity_exhaustive(
            raw in prop::collection::vec(0.0f64..1.0, 1..=20),
            f in prop::collection::vec(0.0f64..1.0, 20),
            ratio in 0.01f64..0.5,
        ) {
            let dist = defensive_mix(&raw, ratio);
            let n = raw.len();
            let lhs: f64 = (0..n).map(|i| dist.probs()[i] * f[i] * dist.reweight(i)).sum();
            let rhs: f64 = f[..n].iter().sum::<f64>() / n as f64;
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
