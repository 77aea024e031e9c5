use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HanError>;

#[derive(Debug, Error)]
pub enum HanError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("numeric divergence: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
}

impl HanError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HanError::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        HanError::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HanError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HanError::Config(_) | HanError::Input(_) => 1,
            HanError::Numeric(_) => 2,
            HanError::Io { .. } | HanError::Format { .. } | HanError::Version { .. } => 3,
        }
    }
}
