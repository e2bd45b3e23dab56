use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("ground truth: {0}")]
    Truth(String),
    #[error("epoch {index}: {msg}")]
    Epoch { index: usize, msg: String },
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Aggregator(#[from] sprayq_aggregator::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
