//! Meta-training: sample games, differentiate the unrolled meta-loss, Adam.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Matrix};
use crate::efg::GameTree;
use crate::error::{GameError, TrainError};
use crate::games::{make_biased_shapley, make_leduc, LeducSpec};
use crate::regret::Algorithm;
use crate::rng::{self, Stream};

use super::network::{Activation, Architecture, PredictionForm, PredictorParams};
use super::unroll::{meta_gradient, UnrollConfig, UnrollPlan};

/// A family of games sharing one tree structure; only payoffs vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameDistribution {
    /// Biased Shapley with `eta ~ U(low, high)`.
    BiasedShapley { low: f64, high: f64 },
    /// Two-player Leduc with tie share `beta ~ U(low, high)`.
    #[serde(rename = "biased_2p_leduc")]
    Biased2pLeduc {
        #[serde(default)]
        low: f64,
        #[serde(default = "half")]
        high: f64,
    },
    /// Standard three-player Leduc (a point mass).
    ThreePlayerLeduc,
}

fn half() -> f64 {
    0.5
}

impl GameDistribution {
    pub fn biased_shapley(low: f64, high: f64) -> Self {
        GameDistribution::BiasedShapley { low, high }
    }

    pub fn biased_2p_leduc() -> Self {
        GameDistribution::Biased2pLeduc { low: 0.0, high: 0.5 }
    }

    pub fn label(&self) -> String {
        match self {
            GameDistribution::BiasedShapley { low, high } => format!("biased_shapley({low},{high})"),
            GameDistribution::Biased2pLeduc { low, high } => format!("biased_2p_leduc({low},{high})"),
            GameDistribution::ThreePlayerLeduc => "three_player_leduc".into(),
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        match *self {
            GameDistribution::BiasedShapley { low, high } | GameDistribution::Biased2pLeduc { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(GameError::Config(format!("parameter range [{low}, {high}] is invalid")));
                }
                Ok(())
            }
            GameDistribution::ThreePlayerLeduc => Ok(()),
        }
    }

    /// The game for parameter value `param` (ignored by point masses).
    pub fn instantiate(&self, param: Option<f64>) -> Result<GameTree, GameError> {
        match self {
            GameDistribution::BiasedShapley { .. } => make_biased_shapley(param.unwrap_or(0.0)),
            GameDistribution::Biased2pLeduc { .. } => make_leduc(LeducSpec::new(2, param.unwrap_or(1.0))),
            GameDistribution::ThreePlayerLeduc => make_leduc(LeducSpec::new(3, 1.0)),
        }
    }

    /// Draws the game parameter, `None` for point masses.
    pub fn sample_param(&self, rng: &mut impl Rng) -> Option<f64> {
        match *self {
            GameDistribution::BiasedShapley { low, high } | GameDistribution::Biased2pLeduc { low, high } => {
                Some(if low < high { rng.random_range(low..high) } else { low })
            }
            GameDistribution::ThreePlayerLeduc => None,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<(Option<f64>, GameTree), GameError> {
        let p = self.sample_param(rng);
        Ok((p, self.instantiate(p)?))
    }

    /// A representative game; every sample shares its structure.
    pub fn structure(&self) -> Result<GameTree, GameError> {
        let p = match *self {
            GameDistribution::BiasedShapley { low, .. } | GameDistribution::Biased2pLeduc { low, .. } => Some(low),
            GameDistribution::ThreePlayerLeduc => None,
        };
        self.instantiate(p)
    }

    /// Head activation, prediction form and scale used when the training
    /// config leaves them open.
    pub fn default_head(&self) -> (Activation, PredictionForm, f64) {
        match self {
            GameDistribution::BiasedShapley { .. } => (Activation::Sigmoid, PredictionForm::Residual, 3.0),
            GameDistribution::Biased2pLeduc { .. } => (Activation::Tanh, PredictionForm::Residual, 1.0),
            GameDistribution::ThreePlayerLeduc => (Activation::Tanh, PredictionForm::Direct, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Unroll horizon `T`.
    pub horizon: usize,
    pub epochs: usize,
    /// Games per batch.
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// `npcfr` or `npcfr+`.
    pub algorithm: Algorithm,
    pub hidden: usize,
    pub layers: usize,
    pub embed: usize,
    pub activation: Option<Activation>,
    pub form: Option<PredictionForm>,
    pub alpha: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            horizon: 32,
            epochs: 256,
            batch: 8,
            seed: 0,
            adam: AdamConfig::default(),
            algorithm: Algorithm::Npcfr,
            hidden: 32,
            layers: 2,
            embed: 8,
            activation: None,
            form: None,
            alpha: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.horizon == 0 || self.epochs == 0 || self.batch == 0 {
            return Err(TrainError::Config("horizon, epochs and batch must be at least 1".into()));
        }
        if !self.algorithm.is_neural() {
            return Err(TrainError::Config(format!(
                "training needs npcfr or npcfr+, got {}",
                self.algorithm
            )));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self, dist: &GameDistribution, game: &GameTree) -> Architecture {
        let (act, form, alpha) = dist.default_head();
        Architecture {
            hidden: self.hidden,
            layers: self.layers,
            embed: self.embed,
            max_actions: game.max_actions(),
            num_infostates: game.num_infostates(),
            activation: self.activation.unwrap_or(act),
            form: self.form.unwrap_or(form),
            alpha: self.alpha.unwrap_or(alpha),
        }
    }

    pub fn unroll(&self) -> UnrollConfig {
        UnrollConfig::new(self.algorithm, self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-mean meta-loss before the update.
    pub loss: f64,
    pub floored_logs: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PredictorParams,
    pub log: Vec<EpochRecord>,
}

/// Trains a fresh predictor. `on_epoch` sees every record as it is produced.
pub fn train(
    dist: &GameDistribution,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    dist.validate()?;
    let structure = dist.structure()?;
    let arch = cfg.architecture(dist, &structure);
    arch.validate().map_err(TrainError::Config)?;
    let mut params = PredictorParams::random(arch, &mut rng::stream(cfg.seed, Stream::Init));
    let plan = UnrollPlan::new(&structure);
    let unroll_cfg = cfg.unroll();
    let mut adam = AdamState::new(cfg.adam, &params.arrays());
    let mut sampler = rng::stream(cfg.seed, Stream::GameSampling);
    let pool = rng::thread_pool();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let games: Vec<GameTree> = (0..cfg.batch)
            .map(|_| dist.sample(&mut sampler).map(|(_, g)| g))
            .collect::<Result<_, _>>()?;
        if let Some(g) = games.iter().find(|g| !plan.matches(g)) {
            return Err(TrainError::Config(format!(
                "sampled game with {} slots does not share the distribution's structure",
                g.num_slots()
            )));
        }
        let results = pool.install(|| {
            games
                .par_iter()
                .map(|g| meta_gradient(&plan, g, &params, &unroll_cfg))
                .collect::<Vec<_>>()
        });
        // Fixed-order reduction keeps training bit-reproducible.
        let mut loss = 0.0;
        let mut floored = 0;
        let mut grads: Vec<Matrix> = params.arrays().iter().map(|m| Matrix::zeros(m.rows, m.cols)).collect();
        for r in results {
            let r = r?;
            loss += r.loss;
            floored += r.floored_logs;
            for (acc, g) in grads.iter_mut().zip(&r.gradients) {
                acc.add_assign(g);
            }
        }
        let scale = 1.0 / cfg.batch as f64;
        loss *= scale;
        for g in &mut grads {
            *g = g.map(|v| v * scale);
        }
        let nonfinite = grads.iter().flat_map(|g| &g.data).filter(|v| !v.is_finite()).count();
        if !loss.is_finite() || nonfinite > 0 {
            return Err(TrainError::Divergence {
                epoch,
                loss,
                floored_logs: floored,
                nonfinite_grads: nonfinite,
            });
        }
        let record = EpochRecord {
            epoch,
            loss,
            floored_logs: floored,
        };
        on_epoch(&record);
        log.push(record);
        adam.update(&mut params.arrays_mut(), &grads);
    }
    Ok(TrainOutcome { params, log })
}
