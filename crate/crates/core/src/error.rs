use std::path::PathBuf;

/// Errors raised anywhere in the detection engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: String },

    #[error("line {line}: duplicate record_id `{record_id}`")]
    DuplicateRecord { line: usize, record_id: String },

    #[error("line {line}: invalid value for `{field}`: {message}")]
    InvalidField {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Retryable failure talking to a backend (connection refused, timeout, 5xx).
    #[error("transport error: {0}")]
    Transport(String),

    /// Backend answered, but with something we cannot use.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
