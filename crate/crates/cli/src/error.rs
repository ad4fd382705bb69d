use std::fmt;
use std::io::ErrorKind;
use std::process::ExitCode;

use viewvec_core::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    /// Downstream reader closed the pipe; exit quietly.
    pub broken_pipe: bool,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
            broken_pipe: false,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
            broken_pipe: false,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Config(_) | Error::UnknownView(_) | Error::ModeMismatch(_) => EXIT_USAGE,
            Error::NumericFailure(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        let broken_pipe = matches!(&e, Error::Io { source, .. } if source.kind() == ErrorKind::BrokenPipe);
        CliError {
            code,
            message: e.to_string(),
            broken_pipe,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            broken_pipe: e.kind() == ErrorKind::BrokenPipe,
            ..CliError::usage(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(e.to_string())
    }
}
