//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error: {0}")]
    Format(String),

    /// Not enough rewrite variants to fill one or more groups.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("bundle/dataset mismatch: {0}")]
    Mismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing output of stage `{stage}` (expected {})", path.display())]
    MissingStage { stage: String, path: PathBuf },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    ///
    /// 1 I/O, 2 validation, 3 capacity, 4 mismatch, 5 insufficient data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Transport(_) | Error::MissingStage { .. } => 1,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::Format(_)
            | Error::Json(_) => 2,
            Error::Capacity(_) => 3,
            Error::Mismatch(_) => 4,
            Error::InsufficientData(_) => 5,
        }
    }
}
