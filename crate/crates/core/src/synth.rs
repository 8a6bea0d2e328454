//! Beta-distributed synthetic datasets with calibrated labels.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::types::{Dataset, Record};

/// Proxy scores drawn from `Beta(alpha, beta)`; each label is a Bernoulli
/// draw with the clean score as its probability. Optional Gaussian noise is
/// added to the observed score only, then clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    pub alpha: f64,
    pub beta: f64,
    pub size: usize,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BetaSpec {
    pub fn new(alpha: f64, beta: f64, size: usize, seed: u64) -> Self {
        Self {
            alpha,
            beta,
            size,
            noise_sd: 0.0,
            seed,
        }
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Expected positive rate, `alpha / (alpha + beta)`.
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.alpha) || !finite_pos(self.beta) {
            return Err(Error::InvalidDataset(format!(
                "beta parameters must be positive, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if self.size == 0 {
            return Err(Error::InvalidDataset("size must be at least 1".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidDataset(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Generates the dataset described by `spec`; ids are `0..size`.
pub fn gen_beta(spec: &BetaSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng_from_seed(spec.seed);
    let ga = Gamma::new(spec.alpha, 1.0).expect("validated shape");
    let gb = Gamma::new(spec.beta, 1.0).expect("validated shape");
    let noise =
        (spec.noise_sd > 0.0).then(|| Normal::new(0.0, spec.noise_sd).expect("validated sd"));

    let mut records = Vec::with_capacity(spec.size);
    for id in 0..spec.size as u64 {
        let x: f64 = ga.sample(&mut rng);
        let y: f64 = gb.sample(&mut rng);
        let clean = if x + y > 0.0 { x / (x + y) } else { 0.0 };
        let label = rng.random::<f64>() < clean;
        let proxy = match &noise {
            Some(n) => (clean + n.sample(&mut rng)).clamp(0.0, 1.0),
            None => clean,
        };
        records.push(Record::labeled(id, proxy, label)?);
    }
    Dataset::new(records)
}

/// Train and test datasets for distribution-shift experiments.
pub fn drift_pair(train: &BetaSpec, test: &BetaSpec) -> Result<(Dataset, Dataset)> {
    Ok((gen_beta(train)?, gen_beta(test)?))
}
