use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] approxsel_core::Error),
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 2 for an exhausted oracle budget, 3 for malformed input or
    /// configuration, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use approxsel_core::Error as E;
        match self {
            CliError::Core(E::BudgetExhausted { .. }) => EXIT_BUDGET,
            CliError::Parse { .. } | CliError::Config { .. } => EXIT_INPUT,
            CliError::Core(
                E::InvalidQuery(_)
                | E::InvalidExperiment(_)
                | E::InvalidDataset(_)
                | E::InvalidRecord(_)
                | E::UnsupportedBound { .. },
            ) => EXIT_INPUT,
            _ => EXIT_FAILURE,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
