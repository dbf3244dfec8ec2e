use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("reference trajectory failed its self-convergence check: {0}")]
    Reference(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(magsplit::Error),
}

impl HarnessError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Reference(_) => 4,
            HarnessError::Core(e) => core_exit_code(e),
            HarnessError::Io(_) | HarnessError::Csv(_) => 1,
        }
    }
}

fn core_exit_code(e: &magsplit::Error) -> i32 {
    match e {
        magsplit::Error::Config(_) | magsplit::Error::Unsupported(_) => 2,
        magsplit::Error::Step { source, .. } => core_exit_code(source),
        _ => 3,
    }
}

impl From<magsplit::Error> for HarnessError {
    fn from(e: magsplit::Error) -> Self {
        match e {
            magsplit::Error::Config(msg) => HarnessError::Config(msg),
            other => HarnessError::Core(other),
        }
    }
}

impl From<toml::de::Error> for HarnessError {
    fn from(e: toml::de::Error) -> Self {
        HarnessError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
