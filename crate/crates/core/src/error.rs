use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in field `{field}`: {message}")]
    Format { field: &'static str, message: String },

    #[error("invalid value at row {row}: {message}")]
    Validation { row: usize, message: String },

    #[error("length mismatch: expected {expected} values, found {actual}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corrupted model: {0}")]
    Corrupt(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Davies-Bouldin index undefined: {non_empty} non-empty cluster(s), need at least 2")]
    UndefinedIndex { non_empty: usize },

    #[error(
        "target fraction {target} is below the achievable range [{low}, {high}] for the temperature bracket"
    )]
    OutOfRange { target: f64, low: f64, high: f64 },

    #[error("degenerate distribution: effective fraction is constant at {constant}, target {target}")]
    DegenerateDistribution { constant: f64, target: f64 },

    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: usize,
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

    pub(crate) fn format(field: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            field,
            message: message.into(),
        }
    }

    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::OutOfRange { .. } => true,
            Error::DegenerateDistribution { .. } => true,
            Error::AtEpoch { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
