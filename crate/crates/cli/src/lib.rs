//! Batch runner for effective-capacity computations: SNR sweeps, figure
//! datasets and validation suites, driven by a flat text configuration.

pub mod config;
pub mod figures;
pub mod output;
pub mod reports;
pub mod sweep;
pub mod validation;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status: 1 validation failure, 2 configuration error,
    /// 3 numeric error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Config(_) | Self::Io(_) | Self::Csv(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<effcap::Error> for CliError {
    fn from(e: effcap::Error) -> Self {
        match e {
            effcap::Error::Domain(m) => Self::Config(m),
            effcap::Error::Numeric(m) | effcap::Error::Fit(m) => Self::Numeric(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
        assert_eq!(CliError::from(effcap::Error::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(effcap::Error::Numeric("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(effcap::Error::Fit("x".into())).exit_code(), 3);
    }
}
