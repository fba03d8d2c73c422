use advcal_core::CalibrationError;
use thiserror::Error;

/// Process exit codes; part of the command-line contract.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INFEASIBLE: i32 = 2;
    pub const INVALID_INPUT: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

#[derive(Error, Debug)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) | CliError::Invalid(_) => exit::INVALID_INPUT,
            CliError::Calibration(e) => match e {
                CalibrationError::OutOfDomain(_) | CalibrationError::UndefinedOutput(_) => exit::INTERNAL,
                _ => exit::INVALID_INPUT,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
