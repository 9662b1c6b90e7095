use std::path::PathBuf;

use thiserror::Error;
use tomo_core::TomoError;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot ingest {path}: {source}")]
    Ingestion { path: PathBuf, source: TomoError },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Tomo(#[from] TomoError),
}

impl BenchError {
    /// Process exit status: 2 for configuration problems, 3 for unreadable or
    /// invalid input data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Ingestion { .. } | Self::Read { .. } => 3,
            _ => 1,
        }
    }
}
