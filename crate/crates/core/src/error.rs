use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("image {image}, level {level}: {detail}")]
    ImageData {
        image: String,
        level: usize,
        detail: String,
    },

    #[error("query {query}: {detail}")]
    Query { query: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("level with {0} segments is not present in the index")]
    MissingLevel(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluator failed: {0}")]
    Evaluator(String),

    #[error("dev query set is empty")]
    EmptyDevSet,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(image: &str, level: usize, detail: impl Into<String>) -> Self {
        Error::ImageData {
            image: image.to_string(),
            level,
            detail: detail.into(),
        }
    }

    pub(crate) fn query(query: &str, detail: impl Into<String>) -> Self {
        Error::Query {
            query: query.to_string(),
            detail: detail.into(),
        }
    }

    /// True for failures of the underlying filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
