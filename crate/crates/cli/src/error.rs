use std::io;
use std::path::PathBuf;

use feedlab_core::engine::{ConfigError, EngineError, StoreError};
use feedlab_core::lingua::LinguaError;
use feedlab_core::simusers::SimError;
use feedlab_core::stats::StatsError;
use feedlab_core::{DatasetError, PersonalizationError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("claims: {0}")]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Lingua(#[from] LinguaError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("reference table: {0}")]
    Personalization(#[from] PersonalizationError),
    #[error("cannot {action} {}: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{} exists; pass --force to overwrite", .0.display())]
    Exists(PathBuf),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("feedlab.toml differs from the config the log in {} was started with; restore it or use a new log directory", .0.display())]
    ConfigChanged(PathBuf),
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("generation failed for {failed} of {total} prompts; first error: {first}")]
    Generation {
        failed: usize,
        total: usize,
        first: String,
    },
}

impl CliError {
    pub fn io(action: &'static str, path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            action,
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
