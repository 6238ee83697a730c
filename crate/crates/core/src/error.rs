use thiserror::Error;

/// Errors raised while configuring, assembling or integrating a solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    /// A parameter violates its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two arrays that must agree in length do not.
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// A matrix factorization met a pivot below the accepted threshold.
    #[error("singular matrix: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    /// The time integration produced non-finite or exploding values.
    #[error("solution diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
}

pub type Result<T> = std::result::Result<T, SolverError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SolverError::Config(msg.into()))
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SolverError::LengthMismatch { expected, found })
    }
}
