use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its legal range.
    #[error("invalid parameter: {0}")]
    Param(String),
    /// Input data is malformed (token out of range, length mismatch, ...).
    #[error("invalid input: {0}")]
    Input(String),
    /// Two artifacts that must belong together do not (model/data vocab,
    /// sequence/graph length, sequence/SCM origin).
    #[error("mismatch: {0}")]
    Mismatch(String),
    /// A numerical procedure failed (NaN loss, divergence, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
