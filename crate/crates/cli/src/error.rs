use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Failure of an estimator or a Monte Carlo computation.
    pub fn numerical(e: monosindex::Error) -> Self {
        CliError::Numerical(e.to_string())
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        CliError::Data(format!("{what}: {e}"))
    }
}
