use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at layer {layer}: expected {expected}, got {got}")]
    Dimension {
        layer: usize,
        expected: String,
        got: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("fusion error at layer {layer}: {reason}")]
    Fusion { layer: usize, reason: String },

    #[error("format error in {source_name} at byte {offset}: {reason}")]
    Format {
        source_name: String,
        offset: usize,
        reason: String,
    },

    #[error("oracle accuracy {accuracy:.4} below required {threshold:.4} after {epochs} epochs")]
    OracleQuality {
        accuracy: f64,
        threshold: f64,
        epochs: usize,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
