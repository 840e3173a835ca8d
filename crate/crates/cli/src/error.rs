use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Run(#[from] pairs_core::Error),

    #[error("acceptance check failed: {0}")]
    Acceptance(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed report: {0}")]
    Report(String),
}

impl CliError {
    /// 2 for configuration, 3 for weight degeneracy, 4 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(e) if e.is_degenerate() => 3,
            CliError::Acceptance(_) => 4,
            CliError::Run(_) | CliError::Io(_) | CliError::Report(_) => 1,
        }
    }
}
