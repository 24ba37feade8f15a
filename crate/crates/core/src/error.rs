use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown quotient family: {0}")]
    UnknownQuotient(String),
    #[error("element `{0}` is outside the support of the sofic approximation")]
    OutsideSupport(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("budget exceeded: {required} required, budget {budget}")]
    BudgetExceeded { required: String, budget: u64 },
    #[error("matrix is singular")]
    Singular,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cache entry `{entry}` failed verification: {reason}")]
    CacheCorrupt { entry: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
