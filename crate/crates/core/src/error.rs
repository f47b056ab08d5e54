use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    /// A cell failed validation during ingestion. `row` is 1-based and counts
    /// the header as row 1, matching what a spreadsheet shows.
    #[error("row {row}, column '{column}': {reason}")]
    Ingest {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty row set")]
    EmptyRows,

    #[error("score undefined for this ensemble: {0}")]
    ScoreUndefined(String),

    #[error("computation failed: {0}")]
    Computation(String),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Broad category used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Ingest { .. }
            | Error::InvalidData(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::InvalidConfig(_) => ErrorKind::Usage,
            Error::EmptyRows | Error::ScoreUndefined(_) | Error::Computation(_) => {
                ErrorKind::Computation
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Computation,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Computation => "computation",
        }
    }
}
