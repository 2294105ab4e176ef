use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("stationary distribution undefined: chain is absorbing (p_S|S = 1, p_S|L = 0)")]
    UndefinedStationary,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
