//! Error type shared by every module in the crate.

use thiserror::Error;

/// Everything that can go wrong while building tensors or running the
/// estimators.  Variants carry enough context to produce a useful
/// machine-readable error object at the CLI boundary.
#[derive(Debug, Error)]
pub enum Error {
    /// A structural precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Requested tensor would exceed the storage cap.
    #[error("storage cap exceeded: {dim}^{order} = {entries} entries > cap {cap}")]
    StorageCap {
        order: usize,
        dim: usize,
        entries: u128,
        cap: u128,
    },

    /// Requested computation would exceed the work budget.
    #[error("work budget exceeded: {work} > budget {budget} ({context})")]
    BudgetExceeded {
        work: String,
        budget: String,
        context: String,
    },

    /// An entry or intermediate value was NaN or infinite.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// An index or mode was outside its valid range.
    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// The shifted-mean estimators are undefined at mu = 0.
    #[error("mean mu must be nonzero: {0}")]
    ZeroMean(String),

    /// Failure reading or writing the JSON interchange format.
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag for the error kind, used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::StorageCap { .. } => "storage_cap",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::NonFinite(_) => "non_finite",
            Error::OutOfRange(_) => "out_of_range",
            Error::ZeroMean(_) => "zero_mean",
            Error::Serialization(_) => "serialization",
        }
    }
}
