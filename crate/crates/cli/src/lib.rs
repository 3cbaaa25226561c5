//! Command-line front end: configuration, dataset ingestion and experiment
//! execution for the `paralens` binary.

pub mod config;
pub mod data;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, DataError};
