use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated an operation's contract (bad argument, wrong carrier, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A translated or constructed point left the simulated region.
    #[error("range error: {0}")]
    Range(String),

    /// A structural precondition on the input configuration failed.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Not enough data for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The cell containing the identity is unclaimed; the caller should resample.
    #[error("identity cell is unclaimed")]
    Unclaimed,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
