use std::io;
use thiserror::Error;

/// Errors produced by scenario generation, imaging and the classifiers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated an operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A byte stream did not match its declared on-disk format.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}
