//! File formats, the model container, run configuration and the pipeline
//! commands behind the `votestack` binary.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod formats;
pub mod report;

pub use config::{load_config, LoadedConfig, Overrides, RunConfig};
pub use error::{Error, Result};
