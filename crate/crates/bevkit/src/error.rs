//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter set fails validation (grid spec, depth bins, camera, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with inputs violating its contract
    /// (dimension mismatches, length mismatches, non-finite data).
    #[error("contract error: {0}")]
    Contract(String),

    /// A file does not conform to an on-disk format.
    #[error("format error in {path}: {message}")]
    Format {
        /// Offending file.
        path: PathBuf,
        /// What went wrong.
        message: String,
    },

    /// The synthetic scene generator cannot satisfy the requested config.
    #[error("generation error: {0}")]
    Generation(String),

    /// Underlying I/O failure; the detail lives in the source chain.
    #[error("i/o error")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn generation(msg: impl Into<String>) -> Self {
        Error::Generation(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
