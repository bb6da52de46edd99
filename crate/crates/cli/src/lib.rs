//! Batch commands behind the `mcgrad` binary: `fit`, `predict`, `evaluate`
//! and `bench`.
//!
//! Every command returns a [`CliError`] whose [`CliError::exit_code`] is 2 for
//! configuration problems, 3 for data problems and 4 for training failures.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_bench, cmd_evaluate, cmd_fit, cmd_predict, BenchArgs, BenchFile, EvaluateArgs, FitReport,
    Suite,
};
pub use config::{Override, RunConfig};
pub use error::{CliError, CliResult};
