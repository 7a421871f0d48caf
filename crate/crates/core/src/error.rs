use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("configuration length mismatch: expected {expected} sites, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("enumeration needs {terms} terms, above the cap of {cap}; use the Monte Carlo path instead")]
    CapExceeded { terms: u128, cap: u128 },

    #[error("parameter theta is required for orthogonal dualities")]
    MissingTheta,

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
