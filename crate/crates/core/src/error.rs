use thiserror::Error;

use crate::minstep::FarkasCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A scalar or vector argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The majorant has no zero on its domain (h3 fails).
    #[error("majorant has no zero: {0}")]
    NoZero(String),

    /// A hypothesis required by the operation does not hold (e.g. h4).
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A closed form disagreed with its bisection / golden-section cross-check.
    #[error("closed form disagrees with numerical cross-check: {0}")]
    CrossCheck(String),

    /// The linearized inclusion has no solution; carries a Farkas-type certificate.
    #[error("linearized inclusion is infeasible (Robinson's condition fails numerically)")]
    Infeasible(Box<FarkasCertificate>),

    #[error("iteration limit of {limit} reached in {context}")]
    IterationLimit { context: &'static str, limit: usize },

    /// Numerical breakdown: the computed step does not satisfy the constraints.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
