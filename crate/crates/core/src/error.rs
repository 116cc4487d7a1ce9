use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid span [{start}, {end}): start must be < end")]
    InvalidSpan { start: usize, end: usize },

    #[error("span [{start}, {end}) exceeds context length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("ground-truth annotation list is empty")]
    EmptyGroundTruth,

    #[error("text {0:?} not found in context")]
    NotFound(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("delimiter span crosses the context segment boundary")]
    SegmentCrossing,

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Process exit code: 1 for usage/config problems, 2 for everything data related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }

    /// Message without the variant prefix, for use after [`Error::tag`].
    pub fn detail(&self) -> String {
        match self {
            Error::Config(m) | Error::Data(m) => m.clone(),
            other => other.to_string(),
        }
    }

    /// Short machine-parsable tag printed before the message on stderr.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            _ => "data",
        }
    }
}
