//! Stand-in for the coating booth.
//!
//! A [`SimScenario`] fixes everything: seed, epoch timing, per-channel
//! profiles, couplings and disturbances. [`generate_stream`] turns it into
//! wire events; [`generate_dataset`] pushes those through the aggregator and
//! labels each epoch with a [`GroundTruth`] function of its features.

pub mod dataset;
pub mod error;
pub mod replay;
pub mod scenario;
pub mod stream;
pub mod truth;

pub use dataset::{generate_dataset, SimDataset};
pub use error::{Error, Result};
pub use replay::{replay, Pacing};
pub use scenario::SimScenario;
pub use stream::{generate_stream, SimRun};
pub use truth::GroundTruth;
