//! Config-driven experiment runner for the quantum hard-disk simulator.

pub mod config;
pub mod error;
pub mod experiments;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use run::{execute, prepare, replay, Overrides, RunReport};
