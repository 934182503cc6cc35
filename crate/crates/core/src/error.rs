use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on a named input was violated.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("path and weights live on different time grids")]
    GridMismatch,

    #[error("evaluation point {0} lies outside the materialized range (max {1})")]
    RangeExceeded(f64, f64),

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("scalar solve failed to bracket a root at node {node}: {message}")]
    BracketFailure { node: usize, message: String },

    #[error("fixed-point iteration did not converge at time node {node} (residual {residual:e})")]
    NonConvergence { node: usize, residual: f64 },

    #[error("decay envelope violated: {0}")]
    EnvelopeViolated(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// Errors caused by bad input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::GridMismatch
                | Error::RangeExceeded(..)
                | Error::InsufficientRange(_)
                | Error::AssumptionViolated(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
