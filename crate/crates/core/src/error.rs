use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid preference prior: {0}")]
    InvalidPrior(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("linear solver failed on a singular system (condition estimate {condition:.3e})")]
    SolverFailure { condition: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
