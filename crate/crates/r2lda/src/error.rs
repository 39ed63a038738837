use thiserror::Error;

/// Errors produced by the r2lda library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a precondition (wrong shape, non-finite entries, bad
    /// configuration value, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The observation vector driving a parameter selection is identically
    /// zero, so no regularization parameter can be inferred from it.
    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    /// A file did not match its expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
