//! Exit-code classification: 2 for bad input, 1 for failures at run time.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an error as a configuration problem.
pub trait ConfigContext<T> {
    fn config(self, what: &str) -> CliResult<T>;
}

/// Tags an error as a runtime failure.
pub trait RuntimeContext<T> {
    fn runtime(self, what: &str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> ConfigContext<T> for Result<T, E> {
    fn config(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Config(e.into().context(what.to_string())))
    }
}

impl<T, E: Into<anyhow::Error>> RuntimeContext<T> for Result<T, E> {
    fn runtime(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into().context(what.to_string())))
    }
}

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(anyhow::anyhow!(msg.into()))
}
