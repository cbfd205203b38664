use std::fmt;

use pnet_core::Error;

/// Process exit codes.
pub mod code {
    pub const VALIDATION: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const INCONCLUSIVE: u8 = 4;
    pub const VERIFICATION: u8 = 5;
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure { code: code::VALIDATION, message: msg.into() }
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Failure { code: code::INFEASIBLE, message: format!("infeasible: {}", msg.into()) }
    }

    pub fn verification(msg: impl Into<String>) -> Self {
        Failure { code: code::VERIFICATION, message: format!("verification failed: {}", msg.into()) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconclusive { .. } => Failure { code: code::INCONCLUSIVE, message: e.to_string() },
            other => Failure::validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::validation(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::validation(format!("invalid JSON: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::validation(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;
