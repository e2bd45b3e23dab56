use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(String),

    #[error("kernel matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("gram matrix is not positive semi-definite (quadratic form {0:e})")]
    NotPsd(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value in feature `{feature}` (row {row})")]
    NonFinite { feature: String, row: usize },

    #[error("training failed at iteration {iter}: {source}")]
    TrainingFailed {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unknown quality target `{0}`")]
    UnknownTarget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
