//! Library side of the `jnrf` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_bench, cmd_evaluate, cmd_predict, cmd_stats, cmd_synth, cmd_train, evaluate_dirs, model_config, predict_all, train_with_progress,
};
pub use config::{Precision, RunConfig};
pub use error::{CliError, Result};
