use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a documented range or cross-field invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// More agents than the 20-bit visibility mask can address.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Malformed input bytes (image decode, JSON syntax, schema).
    #[error("format error: {0}")]
    Format(String),

    /// Caller broke an API contract: wrong buffer or action shape, use after close.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
