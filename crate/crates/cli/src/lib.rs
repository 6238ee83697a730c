//! Configuration, experiment orchestration and CSV output for the `serre`
//! command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{parse_config, RawConfig, RunConfig};
pub use error::CliError;
pub use experiment::run_experiment;
