use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum QpiError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("sizing error: {0}")]
    Sizing(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QpiError>;
