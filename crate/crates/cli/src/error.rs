use thiserror::Error;

/// Failure of a subcommand, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or inconsistent input (exit code 2).
    #[error("{0}")]
    Input(String),
    /// The estimator could not produce a numerically meaningful answer (exit code 4).
    #[error("{0}")]
    Numerical(String),
    /// The reader of our output went away, e.g. `upcr predict … | head`.
    #[error("output closed")]
    ClosedOutput,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 4,
            CliError::ClosedOutput => 0,
        }
    }
}

impl From<upcr::Error> for CliError {
    fn from(e: upcr::Error) -> Self {
        use upcr::Error as E;
        match e {
            E::DegenerateCovariance { .. } | E::IllConditioned { .. } | E::NoSurvivors => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::ClosedOutput;
        }
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
