use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vocabulary is empty after min_count filtering")]
    EmptyVocabulary,

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),

    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),

    #[error("bug {bug_id}: {reason}")]
    InvalidBug { bug_id: String, reason: String },

    #[error("{file}: {reason}")]
    Corrupt { file: String, reason: String },

    #[error("unsupported snapshot format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("source provider: {0}")]
    Provider(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(file: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            file: file.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
