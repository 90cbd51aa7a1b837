use std::fmt;

/// Command failure; validation failures happen before any output is written.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

/// Attaches a context and classifies library errors.
pub trait Context<T> {
    fn invalid(self, what: impl fmt::Display) -> Result<T, CliError>;
    fn failed(self, what: impl fmt::Display) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn invalid(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::Validation(format!("{what}: {e}")))
    }

    fn failed(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(format!("{what}: {e}")))
    }
}
