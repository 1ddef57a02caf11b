use std::fmt;

/// Errors carry the process exit code: 2 for user or configuration
/// problems, 1 for internal invariant violations and I/O failures.
#[derive(Debug)]
pub enum CliError {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn user(msg: impl fmt::Display) -> Self {
        CliError::User(anyhow::anyhow!("{msg}"))
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        CliError::Internal(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(e) => write!(f, "error: {e:#}"),
            CliError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<stochinv::Error> for CliError {
    fn from(e: stochinv::Error) -> Self {
        match e {
            stochinv::Error::StructureDefinition(_) => CliError::Internal(e.into()),
            _ => CliError::User(e.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
