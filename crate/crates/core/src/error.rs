use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the core crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor argument has the wrong size along some axis.
    #[error("{op}: dimension mismatch on {axis}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        axis: String,
        expected: usize,
        got: usize,
    },

    #[error("{what}: index {index} out of range (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("batch norm statistics are uninitialized; run a train-mode pass first")]
    UninitializedStats,

    #[error("label conflict: {first:?} and {second:?} tokenize to the same sequence")]
    LabelConflict { first: String, second: String },

    #[error("label map coverage: missing {missing:?}, extra {extra:?}")]
    Coverage {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, axis: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Shape {
            op,
            axis: axis.into(),
            expected,
            got,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input or configuration rather than
    /// a failure while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::LabelConflict { .. }
                | Error::Coverage { .. }
                | Error::Format { .. }
                | Error::Config(_)
                | Error::Index { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
