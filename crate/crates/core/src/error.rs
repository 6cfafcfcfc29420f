//! Crate-wide error type.
//!
//! Shape mismatches are treated as programmer error and panic via `assert!`
//! at the call site; `Error` covers runtime conditions (non-finite numbers,
//! degenerate weights, I/O, malformed files).

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite gradient entry in {context}")]
    NonFiniteGradient { context: &'static str },

    #[error("non-finite loss in {context} (loss = {loss})")]
    NonFiniteLoss { context: &'static str, loss: f64 },

    #[error("non-finite action at sampling step {step_index}")]
    NonFiniteAction { step_index: usize },

    #[error("all importance weights vanished (every log-weight is -inf)")]
    DegenerateWeights,

    #[error("training aborted at step {step}: {reason}; state dumped to {dump_path}")]
    TrainingAborted {
        step: u64,
        reason: String,
        dump_path: PathBuf,
    },

    #[error("run directory {0} is already in use (lock file present)")]
    RunDirLocked(PathBuf),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
