//! Library half of the `cmarl` binary: run configs, the dataset layout,
//! checkpoints, and one function per subcommand.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;

pub use checkpoint::{Checkpoint, CheckpointError, CheckpointMeta};
pub use commands::{cmd_eval, cmd_generate, cmd_inspect, cmd_train, EvalOptions, EvalOutcome, TrainOptions, TrainReport};
pub use config::{ConfigError, RunConfig};
pub use dataset::{Dataset, DatasetError};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("training failed: {0}")]
    Train(#[from] cmarl_core::TrainError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] cmarl_core::EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::ConfigMismatch(_)
            | CliError::Usage(_)
            | CliError::Dataset(DatasetError::NoSyntheticSection) => EXIT_CONFIG,
            CliError::Checkpoint(_) => EXIT_CHECKPOINT,
            CliError::Dataset(_) | CliError::Train(_) | CliError::Eval(_) | CliError::Io { .. } => EXIT_DATA,
        }
    }
}
