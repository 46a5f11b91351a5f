use thiserror::Error;

/// Errors raised by the estimation and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported noise family: {0}")]
    UnsupportedFamily(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_parameter(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
