use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("oracle budget of {budget} calls exhausted")]
    BudgetExhausted { budget: usize },

    #[error("dataset has no positive records")]
    NoPositives,

    #[error("sample contains no positive labels")]
    NoPositiveSamples,

    #[error("no sampled record has proxy score at or above {tau}")]
    EmptySelection { tau: f64 },

    #[error("record {id} has no oracle label")]
    MissingLabel { id: u64 },

    #[error("invalid counts: {successes} successes out of {trials} trials")]
    InvalidCounts { successes: usize, trials: usize },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("bound method {method} cannot be used here: {reason}")]
    UnsupportedBound {
        method: &'static str,
        reason: &'static str,
    },

    #[error("no trial reports to summarize")]
    EmptyReports,
}
