use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row of an input file failed to parse or violated a record invariant.
    #[error("{file}, row {row}: {message}")]
    Row {
        file: String,
        row: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The data cannot support the requested fit (single class, empty node, constant vector).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("perfect separation: {0}")]
    Separation(String),

    #[error("collinear design: {0}")]
    Collinear(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Separation(_) | Error::Collinear(_) | Error::NoConvergence(_)
        )
    }
}
