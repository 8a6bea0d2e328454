//! File formats and commands behind the `approxsel` binary.

pub mod commands;
pub mod dataset_file;
pub mod error;
pub mod experiment_file;
pub mod query_file;

pub use commands::{run, Cli};
pub use error::CliError;
