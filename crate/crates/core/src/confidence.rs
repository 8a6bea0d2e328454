//! One-sided confidence bounds on sample means.
//!
//! The normal approximation `mu ± sigma/sqrt(s) * sqrt(2 ln(1/delta))` is the
//! default everywhere. Hoeffding, Clopper-Pearson and a percentile bootstrap
//! are available for comparison runs.

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

/// Plug-in standard deviation used when only one observation is available:
/// the largest possible value for data bounded in `[0, 1]`.
const SINGLETON_STDDEV: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    #[default]
    NormalApprox,
    Hoeffding,
    /// Exact binomial bounds; only meaningful for unweighted 0/1 data.
    ClopperPearson,
    Bootstrap {
        resamples: usize,
    },
}

impl BoundMethod {
    pub fn bootstrap() -> Self {
        BoundMethod::Bootstrap {
            resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundMethod::NormalApprox => "normal",
            BoundMethod::Hoeffding => "hoeffding",
            BoundMethod::ClopperPearson => "clopper_pearson",
            BoundMethod::Bootstrap { .. } => "bootstrap",
        }
    }
}

/// Plug-in mean, standard deviation and count of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub stddev: f64,
    pub count: usize,
}

impl SampleStats {
    /// Mean and `n - 1` standard deviation. `None` for an empty slice.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stddev = if n == 1 {
            SINGLETON_STDDEV
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Some(Self {
            mean,
            stddev,
            count: n,
        })
    }

    pub fn from_binary(successes: usize, trials: usize) -> Result<Self> {
        check_counts(successes, trials)?;
        let n = trials as f64;
        let mean = successes as f64 / n;
        let stddev = if trials == 1 {
            SINGLETON_STDDEV
        } else {
            (mean * (1.0 - mean) * n / (n - 1.0)).sqrt()
        };
        Ok(Self {
            mean,
            stddev,
            count: trials,
        })
    }

    /// Self-normalized (ratio) estimate of the mean of `labels` under
    /// importance weights `m`, with a delta-method standard error.
    ///
    /// `stddev` is scaled so that `stddev / sqrt(count)` is the standard error;
    /// with all weights equal this coincides with [`SampleStats::from_values`].
    pub fn self_normalized(labels: &[f64], weights: &[f64]) -> Option<Self> {
        let n = labels.len();
        if n == 0 || n != weights.len() {
            return None;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mean = labels.iter().zip(weights).map(|(y, m)| y * m).sum::<f64>() / total;
        let stddev = if n == 1 {
            SINGLETON_STDDEV
        } else {
            let spread: f64 = labels
                .iter()
                .zip(weights)
                .map(|(y, m)| {
                    let w = m / total;
                    w * w * (y - mean) * (y - mean)
                })
                .sum();
            let nf = n as f64;
            let se2 = spread * nf / (nf - 1.0);
            (se2 * nf).sqrt()
        };
        Some(Self {
            mean,
            stddev,
            count: n,
        })
    }

    pub fn ub(&self, delta: f64) -> f64 {
        ub(self.mean, self.stddev, self.count, delta)
    }

    pub fn lb(&self, delta: f64) -> f64 {
        lb(self.mean, self.stddev, self.count, delta)
    }
}

fn normal_radius(stddev: f64, count: usize, delta: f64) -> f64 {
    stddev / (count as f64).sqrt() * (2.0 * (1.0 / delta).ln()).sqrt()
}

/// `mu + sigma/sqrt(s) * sqrt(2 ln(1/delta))`.
pub fn ub(mean: f64, stddev: f64, count: usize, delta: f64) -> f64 {
    mean + normal_radius(stddev, count, delta)
}

/// `mu - sigma/sqrt(s) * sqrt(2 ln(1/delta))`, clamped at zero.
pub fn lb(mean: f64, stddev: f64, count: usize, delta: f64) -> f64 {
    (mean - normal_radius(stddev, count, delta)).max(0.0)
}

/// Hoeffding deviation for a mean of `count` values in an interval of width `range`.
pub fn hoeffding_radius(range: f64, count: usize, delta: f64) -> f64 {
    range * ((1.0 / delta).ln() / (2.0 * count as f64)).sqrt()
}

fn check_counts(successes: usize, trials: usize) -> Result<()> {
    if trials == 0 || successes > trials {
        Err(Error::InvalidCounts { successes, trials })
    } else {
        Ok(())
    }
}

pub fn clopper_pearson_lower(successes: usize, trials: usize, delta: f64) -> Result<f64> {
    check_counts(successes, trials)?;
    if successes == 0 {
        return Ok(0.0);
    }
    let k = successes as f64;
    Ok(inv_beta_reg(k, (trials - successes) as f64 + 1.0, delta))
}

pub fn clopper_pearson_upper(successes: usize, trials: usize, delta: f64) -> Result<f64> {
    check_counts(successes, trials)?;
    if successes == trials {
        return Ok(1.0);
    }
    let k = successes as f64;
    Ok(inv_beta_reg(
        k + 1.0,
        (trials - successes) as f64,
        1.0 - delta,
    ))
}

/// Inclusive linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn binomial_bootstrap_means(
    successes: usize,
    trials: usize,
    resamples: usize,
    rng: &mut Rng,
) -> Vec<f64> {
    let p = successes as f64 / trials as f64;
    let binom = Binomial::new(trials as u64, p).expect("p lies in [0, 1]");
    let n = trials as f64;
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| binom.sample(rng) as f64 / n)
        .collect();
    means.sort_by(f64::total_cmp);
    means
}

fn resampled_means(values: &[f64], resamples: usize, rng: &mut Rng) -> Vec<f64> {
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    means
}

fn bootstrap_rng(successes: usize, trials: usize, resamples: usize) -> Rng {
    let s = seed::combine(successes as u64, trials as u64);
    seed::rng_from_seed(seed::combine(s, resamples as u64))
}

/// Lower confidence bound at level `1 - delta` on a Bernoulli mean.
///
/// The bootstrap variant resamples with a generator seeded from the counts,
/// so the bound is a deterministic function of its inputs.
pub fn binary_lb(successes: usize, trials: usize, delta: f64, method: BoundMethod) -> Result<f64> {
    let stats = SampleStats::from_binary(successes, trials)?;
    let bound = match method {
        BoundMethod::NormalApprox => stats.lb(delta),
        BoundMethod::Hoeffding => stats.mean - hoeffding_radius(1.0, trials, delta),
        BoundMethod::ClopperPearson => clopper_pearson_lower(successes, trials, delta)?,
        BoundMethod::Bootstrap { resamples } => {
            let mut rng = bootstrap_rng(successes, trials, resamples);
            quantile(
                &binomial_bootstrap_means(successes, trials, resamples, &mut rng),
                delta,
            )
        }
    };
    Ok(bound.clamp(0.0, stats.mean))
}

/// Upper confidence bound at level `1 - delta` on a Bernoulli mean.
pub fn binary_ub(successes: usize, trials: usize, delta: f64, method: BoundMethod) -> Result<f64> {
    let stats = SampleStats::from_binary(successes, trials)?;
    let bound = match method {
        BoundMethod::NormalApprox => stats.ub(delta),
        BoundMethod::Hoeffding => stats.mean + hoeffding_radius(1.0, trials, delta),
        BoundMethod::ClopperPearson => clopper_pearson_upper(successes, trials, delta)?,
        BoundMethod::Bootstrap { resamples } => {
            let mut rng = bootstrap_rng(successes, trials, resamples);
            quantile(
                &binomial_bootstrap_means(successes, trials, resamples, &mut rng),
                1.0 - delta,
            )
        }
    };
    Ok(bound.clamp(stats.mean, 1.0))
}

fn binary_successes(values: &[f64]) -> Option<usize> {
    let mut k = 0;
    for &v in values {
        if v == 1.0 {
            k += 1;
        } else if v != 0.0 {
            return None;
        }
    }
    Some(k)
}

/// Confidence bounds on the mean of nonnegative values in `[0, range]`,
/// drawing bootstrap resamples from a caller-owned generator.
#[derive(Debug)]
pub struct MeanBounds<'r> {
    pub method: BoundMethod,
    /// Upper end of the value range; used by Hoeffding.
    pub range: f64,
    pub rng: &'r mut Rng,
}

impl MeanBounds<'_> {
    fn stats(values: &[f64]) -> Result<SampleStats> {
        SampleStats::from_values(values).ok_or(Error::InvalidCounts {
            successes: 0,
            trials: 0,
        })
    }

    pub fn lower(&mut self, values: &[f64], delta: f64) -> Result<f64> {
        let stats = Self::stats(values)?;
        let bound = match self.method {
            BoundMethod::NormalApprox => stats.lb(delta),
            BoundMethod::Hoeffding => {
                stats.mean - hoeffding_radius(self.range, values.len(), delta)
            }
            BoundMethod::ClopperPearson => {
                let k = binary_successes(values).ok_or(Error::UnsupportedBound {
                    method: "clopper_pearson",
                    reason: "values are not unweighted 0/1 labels",
                })?;
                clopper_pearson_lower(k, values.len(), delta)?
            }
            BoundMethod::Bootstrap { resamples } => {
                let means = match binary_successes(values) {
                    Some(k) => binomial_bootstrap_means(k, values.len(), resamples, self.rng),
                    None => resampled_means(values, resamples, self.rng),
                };
                quantile(&means, delta)
            }
        };
        Ok(bound.clamp(0.0, stats.mean.max(0.0)))
    }

    pub fn upper(&mut self, values: &[f64], delta: f64) -> Result<f64> {
        let stats = Self::stats(values)?;
        let bound = match self.method {
            BoundMethod::NormalApprox => stats.ub(delta),
            BoundMethod::Hoeffding => {
                stats.mean + hoeffding_radius(self.range, values.len(), delta)
            }
            BoundMethod::ClopperPearson => {
                let k = binary_successes(values).ok_or(Error::UnsupportedBound {
                    method: "clopper_pearson",
                    reason: "values are not unweighted 0/1 labels",
                })?;
                clopper_pearson_upper(k, values.len(), delta)?
            }
            BoundMethod::Bootstrap { resamples } => {
                let means = match binary_successes(values) {
                    Some(k) => binomial_bootstrap_means(k, values.len(), resamples, self.rng),
                    None => resampled_means(values, resamples, self.rng),
                };
                quantile(&means, 1.0 - delta)
            }
        };
        Ok(bound.max(stats.mean))
    }
}
