//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors raised by the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("sonic-at-entry: {0}")]
    SonicAtEntry(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("pole error: coefficient formula is singular at t = 1")]
    Pole,
    #[error("linearization inconsistency: {0}")]
    LinearizationInconsistency(String),
    #[error("solvability violated: {0}")]
    Solvability(String),
    #[error("stagnation: {0}")]
    Stagnation(String),
    #[error("S-Condition violated at mode n = {0}")]
    SCondition(usize),
    #[error("subsonic stability condition violated: {0}")]
    StabilityCondition(String),
    #[error("trust region exceeded: {0}")]
    TrustRegion(String),
    #[error("no convergence after {iterations} iterations (last correction {last:e})")]
    NotConverged { iterations: usize, last: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NotConverged { .. } | Error::Numeric(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
