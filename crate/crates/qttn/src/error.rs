use thiserror::Error;

/// Error type shared by all tensor and solver operations.
#[derive(Debug, Error)]
pub enum QttnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("charge error: {0}")]
    Charge(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QttnError>;
