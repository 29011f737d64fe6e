use std::fmt;

/// Failure of a CLI run, split by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file, preset or geometry.
    Config(String),
    /// A numerical routine rejected its input.
    Core(plateau_core::Error),
    Io(std::io::Error),
    /// A check the command is responsible for did not hold.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "invalid input: {e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<plateau_core::Error> for CliError {
    fn from(e: plateau_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
