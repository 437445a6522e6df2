use alloc::string::String;

/// Errors raised by kaf-core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input data violates a dataset invariant (length, finiteness, spacing).
    #[error("invalid data: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The ODE integration produced a non-finite state.
    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    /// All sample points coincide, so no bandwidth can be tuned.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("bandwidth tuning failed: {0}")]
    TuningFailure(String),

    /// Fewer than the requested number of eigenvalues clear the positivity cutoff.
    #[error("kernel operator is rank deficient: requested {requested} eigenpairs, usable rank is {usable}")]
    RankDeficient { requested: usize, usable: usize },

    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
