use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inconsistent dimensions, lengths or indices.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("data length mismatch: expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed `.net` input.
    #[error("parse error at line {line} near `{token}`: {message}")]
    Parse {
        line: usize,
        token: String,
        message: String,
    },

    #[error("unsupported feature at line {line}: {feature}")]
    Unsupported { line: usize, feature: String },

    /// A CPT column that does not sum to one.
    #[error("node `{node}`: probabilities for parent configuration {configuration} sum to {sum}")]
    Validation {
        node: String,
        configuration: usize,
        sum: f64,
    },

    #[error("non-finite residual: {0}")]
    NonFinite(String),

    #[error("unknown node `{name}`; candidates: {}", available.join(", "))]
    UnknownNode {
        name: String,
        available: Vec<String>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
