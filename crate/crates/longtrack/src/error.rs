//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor / grid / parameter shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A numeric computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Bad configuration key or value.
    #[error("config: {0}")]
    Config(String),

    /// Malformed data file (annotations, manifest, model, results).
    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },

    /// Parse failure with a line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data { .. } | Error::Parse { .. } | Error::Io { .. } => 3,
            Error::Shape(_) | Error::Invalid(_) | Error::NonFinite(_) => 4,
        }
    }
}
