//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by corpus handling, scoring, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem failure, tagged with the path that caused it.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A corpus or ratings file failed to parse or validate; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An argument or record violated an operation's contract.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// External-scorer wire protocol failure (timeout, bad response, id mismatch).
    #[error("scorer protocol: {0}")]
    Protocol(String),

    /// A numeric procedure could not produce a result (singular system,
    /// zero variance, non-finite value).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(
        path: impl Into<PathBuf>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
