//! Extensive-form game solving: regret minimization, marginalizability
//! metrics and a meta-learned regret predictor.

pub mod autodiff;
pub mod efg;
pub mod error;
pub mod games;
pub mod harness;
pub mod marginal;
pub mod npcfr;
pub mod regret;
pub mod rng;
pub mod trace;

pub use efg::{GameTree, StrategyProfile, TerminalDistribution, TreeSpec};
pub use error::{CheckpointError, GameError, MetricError, SolveError, TapeError, TrainError};
pub use regret::{cfr_solve, Algorithm, SolveConfig};
pub use trace::RunTrace;
