use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid limits: {0}")]
    Limits(String),
    #[error("config: {0}")]
    Config(String),
    #[error("model for {target}: {msg}")]
    Model { target: String, msg: String },
    #[error(transparent)]
    Aggregator(#[from] sprayq_aggregator::Error),
    #[error(transparent)]
    Core(#[from] sprayq_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
