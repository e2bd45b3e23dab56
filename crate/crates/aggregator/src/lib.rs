//! Sensor-stream side of the quality predictor: status-driven sampling,
//! deadband storage, alignment, imputation and feature extraction.

pub mod channels;
pub mod dataset_io;
pub mod deadband;
pub mod error;
pub mod event;
pub mod features;
pub mod impute;
pub mod live;
pub mod pipeline;
pub mod sampling;
pub mod series;
pub mod sync;

pub use error::{Error, Result};
pub use event::{Quality, SensorEvent};
pub use features::{FeatureVector, StaticParams, FEATURE_NAMES};
pub use pipeline::{Aggregator, AggregatorConfig, ClosedEpoch};
