use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    AlphaOutOfRange(String),
    #[error("the enumeration is infinite unless max_p is finite")]
    UnboundedP,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("{0} is not in the noise-free sector (root must carry no noise)")]
    NotPolynomialRooted(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
