use std::fmt;

use textsr::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }

    pub fn io_at(context: impl fmt::Display, source: std::io::Error) -> Self {
        CliError::io(format!("{context}: {source}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code_of(err: &Error) -> u8 {
    match err {
        Error::Shape(_) | Error::InvalidArgument(_) | Error::Spec { .. } | Error::CheckpointVersion { .. } => {
            EXIT_CONFIG
        }
        Error::CheckpointMissing(_)
        | Error::CheckpointCorrupt(_)
        | Error::Pgm(_)
        | Error::Manifest { .. }
        | Error::Scorer { .. }
        | Error::Io { .. } => EXIT_IO,
        Error::Divergence { .. } => EXIT_DIVERGED,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError { code: exit_code_of(&err), message: err.to_string() }
    }
}
