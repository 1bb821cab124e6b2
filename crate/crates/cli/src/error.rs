use thiserror::Error;

/// Errors reported by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] branchsim_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A re-analysis or rerun disagreed with the stored record.
    #[error("record mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use branchsim_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(E::Config(_) | E::Mode(_) | E::Domain(_)) => 2,
            CliError::Core(E::Capacity { .. }) => 3,
            CliError::Core(_) | CliError::Io(_) | CliError::Mismatch(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
