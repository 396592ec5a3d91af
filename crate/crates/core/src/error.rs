use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violates a structural requirement (parity, range, size).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    /// A caller-side precondition of a checker does not hold, so its
    /// verdict would be meaningless.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An oracle failed validation before an algorithm was allowed to use it.
    #[error("oracle failed validation: min in-window mass {min_mass} < {required}")]
    InvalidOracle { min_mass: f64, required: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
