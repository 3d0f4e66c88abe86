use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed sentence at position {position}: {reason}")]
    MalformedSentence { position: usize, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("unknown task id `{0}`")]
    UnknownTask(String),

    #[error("unknown token id {0}")]
    UnknownTokenId(u32),

    #[error("metric `{metric}` is not defined for {reason}")]
    MetricUndefined { metric: String, reason: String },

    #[error("missing prerequisite: {0}")]
    Prerequisite(String),

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl Error {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedSentence { .. } => "malformed_sentence",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidInput(_) => "invalid_input",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::UnknownTask(_) => "unknown_task",
            Error::UnknownTokenId(_) => "unknown_token_id",
            Error::MetricUndefined { .. } => "metric_undefined",
            Error::Prerequisite(_) => "missing_prerequisite",
            Error::CorruptFile { .. } => "corrupt_file",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
