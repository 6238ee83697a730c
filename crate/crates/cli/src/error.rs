use std::path::PathBuf;

use serre_dg::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl CliError {
    /// 2 for configuration and output-path problems, 3 for divergence,
    /// 4 for assembly failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Solver(SolverError::Config(_)) => 2,
            CliError::Solver(SolverError::Divergence { .. }) => 3,
            CliError::Solver(SolverError::Singular { .. } | SolverError::LengthMismatch { .. }) => 4,
        }
    }
}
