//! Experiment harness around the `acctrisk` library: synthesize a panel,
//! build feature groups, fit and compare models.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
