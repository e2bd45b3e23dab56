use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed event at line {line}: {msg}")]
    Wire { line: usize, msg: String },
    #[error("event for {channel} at t={t_ms} ms is older than the last accepted t={last_ms} ms")]
    OutOfOrder { channel: String, t_ms: i64, last_ms: i64 },
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("t={t_ms} ms precedes the first stored point of {channel}")]
    BeforeFirstPoint { channel: String, t_ms: i64 },
    #[error("channel {0} is fully missing and has no regressors configured")]
    NoRegressors(String),
    #[error("channel {channel} is fully missing and its regression could not be fitted: {msg}")]
    RegressionUnavailable { channel: String, msg: String },
    #[error("every channel is missing; nothing to impute from")]
    AllMissing,
    #[error("epoch spans {rows} grid rows; at least 2 grid steps are needed")]
    EpochTooShort { rows: usize },
    #[error("required channel {0} is absent from the table")]
    MissingChannel(String),
    #[error("fuel flow average is {0}; the fuel-oxygen ratio needs a positive fuel flow")]
    NoFuel(f64),
    #[error("no epoch is open")]
    NoOpenEpoch,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] sprayq_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
