use thiserror::Error;

/// Errors produced by the simulator, learner and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid strategy: {0}")]
    Strategy(String),

    /// A configuration value violates an invariant. `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
