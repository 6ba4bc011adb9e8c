use std::fmt;

use udfp_core::Error;

/// A failure carrying the process exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
            CliError::Violation(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Violation(m) => write!(f, "bound violated: {m}"),
        }
    }
}

/// Classifies a library error raised after the configuration was validated.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_)
            | Error::Csv(_)
            | Error::Parse { .. }
            | Error::MissingPrice { .. }
            | Error::UniverseTooSmall(_)
            | Error::SeriesTooShort { .. }
            | Error::InsufficientHistory { .. }
            | Error::InvalidRelativePrice(_)
            | Error::NonPositiveReturn { .. }
            | Error::InvalidArgument(_) => CliError::Data(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
