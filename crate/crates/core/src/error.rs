use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("WAV error in {path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("manifest row {row}: audio file {path} does not exist")]
    MissingAudio { row: usize, path: PathBuf },

    #[error("unknown class name {name:?}; valid names are: {}", valid.join(", "))]
    UnknownClass { name: String, valid: Vec<String> },

    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),

    #[error("corpus has no verified instances; the auxiliary classifier cannot be trained")]
    NoVerifiedInstances,

    #[error("class {class:?} has {available} verified instances, {required} are required")]
    InsufficientVerified {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("missing {what} for instance {id:?}")]
    MissingForInstance { what: &'static str, id: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
