use std::io;
use std::path::PathBuf;

use delay_horizon::Error as CoreError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_ASSUMPTION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_NO_INPUT: u8 = 66;
pub const EXIT_IO: u8 = 74;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input file {0} does not exist")]
    MissingInput(PathBuf),
    #[error("malformed input {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Malformed { .. } => EXIT_USAGE,
            CliError::MissingInput(_) => EXIT_NO_INPUT,
            CliError::Assumption(_) => EXIT_ASSUMPTION,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Assumption(_) => CliError::Assumption(e.to_string()),
            CoreError::Dimension(_)
            | CoreError::Range(_)
            | CoreError::Validation(_)
            | CoreError::History { .. }
            | CoreError::Step(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
