use std::path::PathBuf;

use thiserror::Error;

use crate::acquisition::AcquisitionError;
use crate::analysis::AnalysisError;
use crate::engine::EngineError;
use crate::grid::GridError;
use crate::io::config::ConfigError;
use crate::io::pgm::PgmError;
use crate::optics::SetupError;
use crate::scene::SceneError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("setup: {0}")]
    Setup(#[from] SetupError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("acquisition: {0}")]
    Acquisition(#[from] AcquisitionError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("grey map: {0}")]
    Pgm(#[from] PgmError),
    #[error("table {path}: {source}")]
    Table { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl Error {
    /// Process exit code: 1 for bad input or I/O, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Engine(EngineError::InsufficientCoverage { .. }) => 1,
            Error::Engine(_) | Error::Acquisition(_) | Error::Analysis(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
