use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the tenrank library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition (shape mismatch,
    /// invalid mode, out-of-range fraction, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input is outside the mathematical domain of the operation
    /// (e.g. decomposing an all-zero tensor).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values were encountered while iterating.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A rank selector could not produce a decision.
    #[error("rank estimation failed: {0}")]
    Estimation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
