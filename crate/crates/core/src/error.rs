use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the embedding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("record {record}: {field}: {message}")]
    Validation {
        record: String,
        field: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty vocabulary for view {0}")]
    EmptyVocabulary(String),

    #[error("unknown view {0}")]
    UnknownView(String),

    #[error("token stream mixes views {expected} and {found}")]
    MixedViews { expected: String, found: String },

    #[error("no valid negative after {attempts} redraws in view {view}")]
    NoValidNegative { view: String, attempts: usize },

    #[error("id {id} out of range for table of size {size}")]
    IdOutOfRange { id: u64, size: u64 },

    #[error("node index {index} out of range for graph of {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },

    #[error("non-finite parameter in {0}")]
    NumericFailure(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("evaluation: {0}")]
    Eval(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(
        record: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            record: record.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
