use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),
    #[error("value {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("instance too large for exhaustive computation: {0}")]
    Infeasible(String),
    #[error("graph file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid switching: {0}")]
    InvalidSwitching(String),
    #[error("state not found in the enumerated state space")]
    UnknownState,
    #[error("sampler gave up after {0} attempts")]
    RetryCapExceeded(u64),
    #[error("coupling graph completion failed: {0}")]
    CompletionFailed(String),
    #[error("precondition unmet: {0}")]
    Precondition(String),
    #[error("unknown name: {0}")]
    Unknown(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
