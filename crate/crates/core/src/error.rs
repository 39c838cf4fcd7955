//! Error types shared across the toolkit.

use std::io;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Top-level error for all fallible operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (bad dimension,
    /// empty batch, out-of-range parameter, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A file or byte stream does not match one of the toolkit formats.
    #[error(transparent)]
    Format(#[from] FormatError),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A metric is mathematically undefined on the given inputs
    /// (e.g. Pearson correlation of a constant image).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

/// Structured decoding failures for the SPKL and checkpoint containers
/// and for image ingestion.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unknown format version {0}")]
    UnknownVersion(u32),

    #[error("truncated file while reading {0}")]
    Truncated(&'static str),

    #[error("trailing bytes after payload")]
    TrailingData,

    #[error("inconsistent header: {0}")]
    Header(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("image decode failed: {0}")]
    Decode(String),
}
