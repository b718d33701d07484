//! Experiment harness for feature-space adapters: configuration, run
//! records and the `adapts` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod latent;
pub mod linear;
pub mod pipeline;
pub mod record;
pub mod sweeps;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
