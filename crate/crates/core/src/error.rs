use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown dataset `{0}` (expected one of DS1, DS2, DS3, DS4)")]
    UnknownDataset(String),

    #[error("invalid dataset spec `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },

    #[error("row has {got} features, expected {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("non-finite value at feature F{feature}")]
    NonFinite { feature: usize },

    #[error("could not draw both classes for rule `{rule}` after {attempts} attempts")]
    ClassBalance { rule: String, attempts: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("{path}: line {line}: {reason}")]
    Csv {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("operation `{op}` is not supported for {what}")]
    Unsupported { op: &'static str, what: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: field `{field}`: {reason}")]
    Schema {
        path: PathBuf,
        field: String,
        reason: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configs, names, files),
    /// as opposed to failures while running an otherwise valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnknownDataset(_)
                | Error::InvalidSpec { .. }
                | Error::Csv { .. }
                | Error::InvalidParams(_)
                | Error::Schema { .. }
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
