use std::path::PathBuf;

/// Errors raised by the forecasting engine.
///
/// `Io` is kept separate from everything else so front ends can tell
/// "the data or config is wrong" apart from "the filesystem failed".
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("series `{series_id}`: {message}")]
    Series { series_id: String, message: String },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the underlying filesystem rather than of the
    /// content being processed.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
