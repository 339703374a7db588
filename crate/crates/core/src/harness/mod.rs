//! Experiment runner: evaluation sweeps, threshold tables, CSV/JSON output
//! and the analytic biased-Shapley oracle.

mod config;
mod eval;
mod oracle;
mod output;
mod tables;

use std::path::Path;

use thiserror::Error;

use crate::error::{CheckpointError, GameError, SolveError, TapeError, TrainError};

pub use config::{ExperimentConfig, Tier, TierPreset};
pub use eval::{load_predictor, run_eval, solve_one, trajectory_minima, CellTiming, EvalOutput, ResultRow, TrajectoryMin};
pub use oracle::{gradcheck_suite, oracle_sweep, parse_eta_grid, OracleRow, CCE_TOLERANCE, NASH_TOLERANCE};
pub use output::{parse_results, write_results, write_tables, write_timings, write_train_log};
pub use tables::{build_best_table, build_threshold_table, BestRow, Tables, ThresholdRow, ThresholdTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on `{path}`: {detail}")]
    Io { path: String, detail: String },
    #[error("{0} needs a predictor checkpoint (pass --checkpoint or set `checkpoint`)")]
    MissingCheckpoint(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

impl HarnessError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::MissingCheckpoint(_) => "missing_checkpoint",
            HarnessError::Checkpoint(_) => "checkpoint",
            HarnessError::Game(_) => "game",
            HarnessError::Solve(_) => "solve",
            HarnessError::Train(TrainError::Divergence { .. }) => "divergence",
            HarnessError::Train(_) => "train",
            HarnessError::Tape(_) => "tape",
        }
    }
}
