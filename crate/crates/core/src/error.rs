use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Each variant maps onto a stable machine-readable code (see [`KstabError::code`])
/// that the command-line front end reports alongside the message.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KstabError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("calibration required: {0}")]
    Calibration(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl KstabError {
    pub fn code(&self) -> &'static str {
        match self {
            KstabError::Validation(_) => "E_VALIDATION",
            KstabError::Domain(_) => "E_DOMAIN",
            KstabError::Quadrature { .. } => "E_QUADRATURE",
            KstabError::Convergence(_) => "E_CONVERGENCE",
            KstabError::Calibration(_) => "E_CALIBRATION",
            KstabError::Schema(_) => "E_SCHEMA",
            KstabError::Io(_) => "E_IO",
        }
    }
}

impl From<std::io::Error> for KstabError {
    fn from(e: std::io::Error) -> Self {
        KstabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for KstabError {
    fn from(e: serde_json::Error) -> Self {
        KstabError::Schema(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KstabError>;
