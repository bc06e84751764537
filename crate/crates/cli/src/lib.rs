//! Scenario files, the `srbd` subcommands and their artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod trajectory_csv;

pub use config::{Overrides, Scenario, ScenarioConfig};
pub use error::{CliError, CliResult};
