//! Experiment driver: TOML configs, seeded replications, CSV output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::HarnessError;
