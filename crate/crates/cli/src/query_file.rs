//! Query JSON: the target, budget and estimator choice plus optional
//! estimator tunables. Unknown keys are rejected.
//!
//! ```json
//! {"kind": "RT", "gamma": 0.9, "budget": 1000, "delta": 0.05,
//!  "estimator": "IS-CI", "seed": 7, "weight_exponent": 0.5}
//! ```

use std::path::Path;

use approxsel_core::confidence::{BoundMethod, DEFAULT_BOOTSTRAP_RESAMPLES};
use approxsel_core::{EstimatorConfig, EstimatorKind, QueryKind, QuerySpec, Target};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Bound method names accepted in query and experiment files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    Normal,
    Hoeffding,
    ClopperPearson,
    Bootstrap,
}

impl BoundName {
    pub fn method(self, resamples: Option<usize>) -> BoundMethod {
        match self {
            BoundName::Normal => BoundMethod::NormalApprox,
            BoundName::Hoeffding => BoundMethod::Hoeffding,
            BoundName::ClopperPearson => BoundMethod::ClopperPearson,
            BoundName::Bootstrap => BoundMethod::Bootstrap {
                resamples: resamples.unwrap_or(DEFAULT_BOOTSTRAP_RESAMPLES),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryFile {
    pub kind: QueryKind,
    pub gamma: Option<f64>,
    pub gamma_r: Option<f64>,
    pub gamma_p: Option<f64>,
    pub budget: usize,
    pub delta: f64,
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub seed: u64,
    pub step: Option<usize>,
    pub mix_ratio: Option<f64>,
    pub weight_exponent: Option<f64>,
    pub bound_method: Option<BoundName>,
    pub bootstrap_resamples: Option<usize>,
    pub two_stage: Option<bool>,
    pub raw_label_precision: Option<bool>,
}

impl QueryFile {
    pub fn target(&self) -> std::result::Result<Target, String> {
        match (self.kind, self.gamma, self.gamma_r, self.gamma_p) {
            (QueryKind::RecallTarget, Some(g), None, None) => Ok(Target::Recall(g)),
            (QueryKind::PrecisionTarget, Some(g), None, None) => Ok(Target::Precision(g)),
            (QueryKind::JointTarget, None, Some(recall), Some(precision)) => {
                Ok(Target::Joint { recall, precision })
            }
            (QueryKind::JointTarget, ..) => Err("JT queries take gamma_r and gamma_p".into()),
            _ => Err("RT and PT queries take a single gamma".into()),
        }
    }

    pub fn config(&self) -> EstimatorConfig {
        let d = EstimatorConfig::default();
        EstimatorConfig {
            step: self.step.unwrap_or(d.step),
            mix_ratio: self.mix_ratio.unwrap_or(d.mix_ratio),
            weight_exponent: self.weight_exponent.unwrap_or(d.weight_exponent),
            bound_method: self
                .bound_method
                .map_or(d.bound_method, |b| b.method(self.bootstrap_resamples)),
            two_stage: self.two_stage.unwrap_or(d.two_stage),
            raw_label_precision: self.raw_label_precision.unwrap_or(d.raw_label_precision),
        }
    }

    /// Validated spec and configuration; `path` labels error messages.
    pub fn resolve(&self, path: &Path) -> Result<(QuerySpec, EstimatorConfig)> {
        let target = self.target().map_err(|m| CliError::config(path, m))?;
        let spec = QuerySpec::new(target, self.budget, self.delta, self.estimator, self.seed)
            .map_err(|e| CliError::config(path, e.to_string()))?;
        let config = self.config();
        config
            .validate()
            .map_err(|e| CliError::config(path, e.to_string()))?;
        Ok((spec, config))
    }
}

pub fn parse_query(text: &str, path: &Path) -> Result<QueryFile> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}
