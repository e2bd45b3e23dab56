//! Library half of the `sprayq` binary, so integration tests can drive the
//! commands without spawning processes.

pub mod commands;
pub mod config;

pub use commands::Overrides;
pub use config::{ConfigError, RunConfig};
