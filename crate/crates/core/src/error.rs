//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// File does not start with the expected magic.
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: Vec<u8> },

    /// File ended before the declared payload was complete.
    #[error("truncated payload: declared {declared} bytes, found {found}")]
    Truncated { declared: u64, found: u64 },

    /// Bytes remain after the declared payload.
    #[error("trailing garbage: {extra} bytes after payload")]
    TrailingGarbage { extra: u64 },

    /// Unused bits in the final payload byte/nibble are not zero.
    #[error("nonzero padding bits in final payload unit")]
    NonzeroPadding,

    /// Argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Request exceeds what the implementation can enumerate or hold.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A statistic cannot be estimated from the given data.
    #[error("estimation error: no trials with input pair (x={x}, y={y})")]
    MissingInputPair { x: u8, y: u8 },

    /// A file-backed source ran out of bits.
    #[error("source exhausted: needed {needed} more bits, {available} available")]
    SourceUnderflow { needed: u64, available: u64 },

    /// Timing table lacks the segments (or declared totals) for a direction.
    #[error("incomplete timing table: {0}")]
    IncompleteTable(String),

    /// Invalid protocol configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
