//! Benchmark harness comparing tomography corrections on simulated data.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod stats;

pub use config::{Algorithm, ExperimentConfig, ExperimentKind};
pub use error::{BenchError, Result};
