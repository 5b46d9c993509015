use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("invalid interaction: {0}")]
    InvalidInteraction(String),

    #[error("capacity exceeded: {limit} (requested {requested}, maximum {maximum})")]
    Capacity {
        limit: &'static str,
        requested: usize,
        maximum: usize,
    },

    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("not trace class: {0}")]
    NotTraceClass(String),

    #[error("accuracy target missed: {0}")]
    Accuracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
