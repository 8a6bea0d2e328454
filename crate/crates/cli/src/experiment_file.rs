//! Experiment JSON: a data source, named query arms, trial count and an
//! optional sweep grid.
//!
//! ```json
//! {
//!   "dataset": {"beta": {"alpha": 0.01, "beta": 2, "size": 100000, "seed": 1}},
//!   "trials": 100,
//!   "base_seed": 7,
//!   "arms": [{"name": "is-rt", "query": {"kind": "RT", "gamma": 0.9, "budget": 10000,
//!                                        "delta": 0.05, "estimator": "IS-CI"}}],
//!   "sweep": [{"param": "weight_exponent", "values": [0, 0.5, 1]}]
//! }
//! ```
//!
//! `dataset` may instead be `{"file": "data.csv"}`, resolved relative to the
//! experiment file. A `train` source of the same shape turns the run into a
//! drift comparison, with `dataset` as the test side. `positive_rate`
//! subsamples a file dataset to the given positive fraction first.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use approxsel_core::harness::{
    resample_positive_rate, Arm, DataSource, ExperimentConfig, SweepAxis,
};
use approxsel_core::BetaSpec;
use serde::Deserialize;

use crate::dataset_file::read_dataset;
use crate::error::{CliError, Result};
use crate::query_file::{BoundName, QueryFile};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceFile {
    Beta(BetaSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmFile {
    pub name: String,
    pub query: QueryFile,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(
    rename_all = "snake_case",
    tag = "param",
    content = "values",
    deny_unknown_fields
)]
pub enum SweepFile {
    Gamma(Vec<f64>),
    Budget(Vec<usize>),
    NoiseSd(Vec<f64>),
    Beta(Vec<f64>),
    MixRatio(Vec<f64>),
    Step(Vec<usize>),
    WeightExponent(Vec<f64>),
    BoundMethod(Vec<BoundName>),
}

impl SweepFile {
    fn axis(&self) -> SweepAxis {
        match self.clone() {
            SweepFile::Gamma(v) => SweepAxis::Gamma(v),
            SweepFile::Budget(v) => SweepAxis::Budget(v),
            SweepFile::NoiseSd(v) => SweepAxis::NoiseSd(v),
            SweepFile::Beta(v) => SweepAxis::Beta(v),
            SweepFile::MixRatio(v) => SweepAxis::MixRatio(v),
            SweepFile::Step(v) => SweepAxis::Step(v),
            SweepFile::WeightExponent(v) => SweepAxis::WeightExponent(v),
            SweepFile::BoundMethod(v) => {
                SweepAxis::BoundMethod(v.into_iter().map(|b| b.method(None)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub dataset: SourceFile,
    pub train: Option<SourceFile>,
    pub positive_rate: Option<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub arms: Vec<ArmFile>,
    #[serde(default)]
    pub sweep: Vec<SweepFile>,
}

/// A fully resolved experiment: harness configuration plus an optional
/// training source for drift runs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub train: Option<DataSource>,
}

pub fn parse_experiment(text: &str, path: &Path) -> Result<ExperimentFile> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

impl ExperimentFile {
    fn source(&self, file: &SourceFile, path: &Path) -> Result<DataSource> {
        match file {
            SourceFile::Beta(spec) => {
                if self.positive_rate.is_some() {
                    return Err(CliError::config(
                        path,
                        "positive_rate applies to file datasets only",
                    ));
                }
                spec.validate()
                    .map_err(|e| CliError::config(path, e.to_string()))?;
                Ok(DataSource::Beta(*spec))
            }
            SourceFile::File(rel) => {
                let base = path.parent().unwrap_or(Path::new("."));
                let mut dataset = read_dataset(&base.join(rel))?;
                if let Some(rate) = self.positive_rate {
                    dataset = resample_positive_rate(&dataset, rate, self.base_seed)
                        .map_err(|e| CliError::config(path, e.to_string()))?;
                }
                Ok(DataSource::Loaded(Arc::new(dataset)))
            }
        }
    }

    /// Loads referenced datasets and validates every arm; `path` is the
    /// experiment file's own location.
    pub fn resolve(&self, path: &Path) -> Result<Experiment> {
        let arms = self
            .arms
            .iter()
            .map(|a| {
                let (spec, config) = a.query.resolve(path)?;
                Ok(Arm::new(a.name.clone(), spec, config))
            })
            .collect::<Result<Vec<_>>>()?;
        let config = ExperimentConfig {
            source: self.source(&self.dataset, path)?,
            arms,
            trials: self.trials,
            base_seed: self.base_seed,
            sweep: self.sweep.iter().map(SweepFile::axis).collect(),
        };
        config
            .validate()
            .map_err(|e| CliError::config(path, e.to_string()))?;
        let train = self
            .train
            .as_ref()
            .map(|t| self.source(t, path))
            .transpose()?;
        if train.is_some() && !config.sweep.is_empty() {
            return Err(CliError::config(path, "drift runs do not take a sweep"));
        }
        Ok(Experiment { config, train })
    }
}
