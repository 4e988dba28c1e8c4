use singlab::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("assumption violation: {0}")]
    Assumption(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Assumption(_) => "assumption",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Assumption(m) | CliError::Numerical(m) => m.clone(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_)
            | Error::UnknownName { .. }
            | Error::InvalidInput(_)
            | Error::GridMismatch(_)
            | Error::BoundaryMismatch(_)
            | Error::DegenerateGrid(_)
            | Error::NegativeArgument(_)
            | Error::DomainError(_) => CliError::Config(msg),
            Error::AssumptionViolation { .. } | Error::NotSubspaceArrangement => CliError::Assumption(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
