use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation failed to converge or produced a non-finite result.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A tail fit could not be performed on the supplied data.
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn numeric<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numeric(msg.into()))
}
