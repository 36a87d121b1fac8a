use thiserror::Error;

/// Errors produced by the model, sampling, learning and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent shapes or missing pieces in a composite object.
    #[error("structural error: {0}")]
    Structural(String),

    /// Exhaustive enumeration requested above the configured limit.
    #[error("capacity error: {n} variables exceeds the enumeration limit of {limit}")]
    Capacity { n: usize, limit: usize },

    /// Value outside the domain of the operation (non-spin entries, zero
    /// probabilities under a logarithm, empty sample sets, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated an argument precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}

pub(crate) fn structural<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Structural(msg.into()))
}
