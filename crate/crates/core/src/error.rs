//! Crate-wide error type.

/// Errors produced by the face pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is inconsistent or out of range.
    #[error("invalid config: {0}")]
    Config(String),

    /// A runtime input violates an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    /// A serialized artifact is malformed, truncated, or has the wrong
    /// magic/version.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for [`Error::Config`].
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Shorthand for [`Error::Input`].
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Shorthand for [`Error::Format`].
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
