//! Experiment harness behind the `clutter` binary.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{parse_config, ExperimentConfig, Overrides};
