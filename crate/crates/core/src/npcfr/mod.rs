//! Neural predictive CFR: the learned regret predictor, its differentiable
//! unrolled solver, meta-training and checkpoints.

pub mod checkpoint;
pub mod network;
pub mod train;
pub mod unroll;

pub use checkpoint::Checkpoint;
pub use network::{Activation, Architecture, PredictionForm, PredictorParams, PredictorVars};
pub use train::{train, EpochRecord, GameDistribution, TrainConfig, TrainOutcome};
pub use unroll::{gradcheck_unroll, meta_gradient, meta_loss_value, unroll, MetaGradient, UnrollConfig, UnrollOutput, UnrollPlan};
