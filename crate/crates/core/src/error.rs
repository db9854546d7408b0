use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Filter-mode assimilation removed every member of the population.
    /// The caller may switch to regenerate mode and retry.
    #[error("population exhausted by event '{0}'")]
    PopulationExhausted(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code class: 1 for validation-style errors, 2 for runtime faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidModel(_)
            | Error::Validation(_)
            | Error::Parse(_) => 1,
            _ => 2,
        }
    }
}
