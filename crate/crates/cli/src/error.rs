//! Exit-code mapping.

use noisestab::Error;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Malformed input: exit 2.
    Input(String),
    /// Numeric or meshing failure: exit 3.
    Numeric(String),
    /// Enumeration budget exceeded: exit 4.
    Budget(String),
    /// Optimizer did not converge; artifacts were written: exit 5.
    NotConverged(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Budget(_) => 4,
            CliError::NotConverged(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Budget(m) => write!(f, "{m}"),
            CliError::NotConverged(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { .. } => CliError::Budget(format!("{e}; rerun with --method mc")),
            Error::DegenerateMesh(_) | Error::Numeric(_) | Error::Unsupported(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
