use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] mvtrack_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Attaches a file name to a line-level format error.
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        match self {
            Error::Format { line, message } => Error::Parse { path: path.into(), line, message },
            other => other,
        }
    }
}
