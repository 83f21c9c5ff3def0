//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes:
/// configuration/usage problems, numeric/solver failures, and I/O failures
/// are distinguished so scripts can react to each class.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver failure at t={t}: {msg}")]
    Solver { t: usize, msg: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("Sharpe ratio undefined: zero return volatility")]
    UndefinedSharpe,

    #[error("trajectory inconsistent with bond dynamics: {0}")]
    InconsistentTrajectory(String),

    #[error("degenerate position: {0}")]
    DegeneratePosition(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

impl Error {
    /// Attach a path to a raw `std::io::Error`.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
