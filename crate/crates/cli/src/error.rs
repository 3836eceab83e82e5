use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("solver: {0}")]
    Solver(#[from] bessel_flow::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}
