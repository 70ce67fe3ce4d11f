use std::io;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or settings that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed binary or text input.
    #[error("format error: {0}")]
    Format(String),

    /// A NaN or infinity appeared where a finite value was required.
    #[error("numeric failure at {step}: {detail}")]
    Numeric { step: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn numeric(step: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            step: step.into(),
            detail: detail.into(),
        }
    }
}
