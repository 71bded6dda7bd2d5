//! Crate-wide error type.
//!
//! Configuration problems (bad dimensions, invalid parameter values, malformed
//! input files) map to CLI exit code 1; numerical and solver failures map to
//! exit code 2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: dimensions, parameter ranges, file contents.
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical breakdown: non-finite values, failed decompositions.
    #[error("numerical error: {0}")]
    Numeric(String),
    /// The conic backend gave up on a problem that should be solvable.
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration errors, 2 for
    /// numerical/solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            Error::Numeric(_) | Error::Solver(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
