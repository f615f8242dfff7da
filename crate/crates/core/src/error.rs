use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("repository root {0} does not exist or is not a directory")]
    RootNotFound(PathBuf),

    #[error("repository has {count} source files, outside the required bounds [{min}, {max}]")]
    FileCountOutOfBounds { count: usize, min: usize, max: usize },

    #[error("cursor {line}:{column} is outside {path}")]
    CursorOutOfRange {
        path: String,
        line: usize,
        column: usize,
    },

    #[error("unsupported language for {0}")]
    UnsupportedLanguage(String),

    #[error("file {0} is not part of the repository")]
    UnknownFile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate prediction for task {0}")]
    DuplicatePrediction(String),

    #[error("prediction for unknown task {0}")]
    UnknownTask(String),

    #[error("parser failure on {0}")]
    Parse(String),

    #[error("{0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn malformed(path: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }
}
