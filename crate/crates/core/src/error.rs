use std::path::PathBuf;

/// Errors raised by the library. Validation never produces an error on its
/// own; callers decide whether a non-empty violation list is fatal.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("corpus validation failed: {0}")]
    Validation(String),

    #[error("unknown relation ids: {}", .0.join(", "))]
    UnknownRelations(Vec<String>),

    #[error("label {class_id:?} is not in the label space")]
    UnknownClass { class_id: String },

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("empty training view")]
    EmptyTrainingView,

    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("frequency table has no nonzero class count")]
    AllZeroFrequencies,

    #[error("cannot split {docs} documents into {folds} folds")]
    FoldCount { docs: usize, folds: usize },

    #[error("round {round}, fold {fold}: {source}")]
    Fold {
        round: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
