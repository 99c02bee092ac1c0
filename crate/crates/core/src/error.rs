use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("topology generation failed: {0}")]
    Generation(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
