//! Approximate selection queries over proxy-scored datasets.
//!
//! A query asks for the records matching an expensive oracle predicate,
//! with a minimum recall or precision that must hold with probability
//! `1 - delta`, while calling the oracle at most `budget` times. Every record
//! carries a cheap proxy score; the engine samples records for oracle
//! labeling, picks a proxy threshold from the sample, and returns the
//! sampled positives together with every record at or above the threshold.

pub mod confidence;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod query;
pub mod sampling;
pub mod seed;
pub mod synth;
pub mod types;

pub use confidence::{BoundMethod, SampleStats};
pub use error::{Error, Result};
pub use estimators::{Diagnostics, EstimatorConfig, Fallback, ThresholdResult};
pub use harness::{ExperimentConfig, TrialReport};
pub use metrics::{true_precision, true_recall};
pub use query::run_query;
pub use sampling::{BudgetedOracle, LabeledDraw, WeightDistribution, WeightedSample};
pub use synth::BetaSpec;
pub use types::{
    Dataset, EstimatorKind, JointCalls, QueryKind, QuerySpec, Record, ResultSet, Target,
};
