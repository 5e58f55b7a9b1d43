use std::fmt;
use std::io;

use octoport_core::Error;

/// Failures of the runner, each tied to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Every problem found in a configuration file, one line each.
    Validation(Vec<String>),
    Core(Error),
    /// A check ran to completion and did not meet its tolerance.
    CheckFailed(String),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::InvalidState(_) | Error::Shape(_) => 2,
                Error::Accuracy(_) | Error::Convention(_) => 3,
                Error::Infeasible(_) | Error::Truncation { .. } => 4,
            },
            CliError::CheckFailed(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(errors) => {
                write!(f, "invalid configuration ({} error{})", errors.len(), if errors.len() == 1 { "" } else { "s" })?;
                for e in errors {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
            CliError::Core(e) => e.fmt(f),
            CliError::CheckFailed(msg) => write!(f, "check failed: {msg}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}
