use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which eye stream a per-frame error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eye {
    Left,
    Right,
}

impl std::fmt::Display for Eye {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Eye::Left => "left",
            Eye::Right => "right",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("zero-norm {eye} feature vector at step {t}")]
    ZeroNorm { t: usize, eye: Eye },

    #[error("feature dimension mismatch at step {t}: expected {expected}, found {found}")]
    DimensionMismatch { t: usize, expected: usize, found: usize },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{path}: byte offset {offset}: {msg}")]
    Format { path: PathBuf, offset: u64, msg: String },

    #[error("{path}: truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { path: PathBuf, expected: u64, actual: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("demo {id}: {stage}: {source}")]
    Demo {
        id: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Attach a demonstration id and pipeline stage to an error.
    pub fn in_demo(self, id: &str, stage: &'static str) -> Self {
        Error::Demo {
            id: id.to_string(),
            stage,
            source: Box::new(self),
        }
    }
}
