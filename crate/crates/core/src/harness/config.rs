use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::npcfr::{GameDistribution, TrainConfig};
use crate::regret::Algorithm;

use super::HarnessError;

/// Compute budget preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Minutes: 8 training epochs, 8 games, `2^10` steps.
    Smoke,
    /// Desk scale: full biased Shapley protocol, short Leduc runs.
    Desk,
    /// The paper's budgets; Leduc training takes hours.
    Full,
}

impl std::str::FromStr for Tier {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoke" => Ok(Tier::Smoke),
            "desk" => Ok(Tier::Desk),
            "full" => Ok(Tier::Full),
            other => Err(HarnessError::Config(format!("unknown tier `{other}`"))),
        }
    }
}

/// Values a tier supplies when the config leaves them open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierPreset {
    pub samples: usize,
    pub log2_steps: u32,
    pub epochs: usize,
}

impl Tier {
    pub fn preset(self, dist: &GameDistribution) -> TierPreset {
        let leduc = !matches!(dist, GameDistribution::BiasedShapley { .. });
        match (self, leduc) {
            (Tier::Smoke, _) => TierPreset { samples: 8, log2_steps: 10, epochs: 8 },
            (Tier::Desk, false) => TierPreset { samples: 64, log2_steps: 14, epochs: 1024 },
            (Tier::Desk, true) => TierPreset { samples: 8, log2_steps: 12, epochs: 32 },
            (Tier::Full, false) => TierPreset { samples: 64, log2_steps: 14, epochs: 4096 },
            (Tier::Full, true) => TierPreset {
                samples: 64,
                log2_steps: if matches!(dist, GameDistribution::ThreePlayerLeduc) { 16 } else { 18 },
                epochs: 256,
            },
        }
    }
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: GameDistribution,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Games sampled per seed; the tier decides when absent.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Evaluate at `2^0, ..., 2^K`; the tier decides when absent.
    #[serde(default)]
    pub log2_steps: Option<u32>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Descending NashGap thresholds for the fraction table.
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Predictor used by neural algorithms.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tier: Option<Tier>,
    /// Fixed game parameter for `solve`; sampled when absent.
    #[serde(default)]
    pub game_param: Option<f64>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Cfr, Algorithm::CfrPlus, Algorithm::Pcfr, Algorithm::PcfrPlus]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_thresholds() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5]
}

impl ExperimentConfig {
    pub fn new(distribution: GameDistribution) -> Self {
        ExperimentConfig {
            distribution,
            algorithms: default_algorithms(),
            samples: None,
            log2_steps: None,
            seeds: default_seeds(),
            thresholds: default_thresholds(),
            checkpoint: None,
            out: None,
            tier: None,
            game_param: None,
            train: None,
        }
    }

    /// Parses JSON; errors carry serde's field, line and column diagnostics.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn tier(&self) -> Tier {
        self.tier.unwrap_or(Tier::Smoke)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or_else(|| self.tier().preset(&self.distribution).samples)
    }

    pub fn log2_steps(&self) -> u32 {
        self.log2_steps.unwrap_or_else(|| self.tier().preset(&self.distribution).log2_steps)
    }

    pub fn steps(&self) -> usize {
        1usize << self.log2_steps()
    }

    /// Training settings with the tier's epoch count unless given explicitly.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.unwrap_or_else(|| TrainConfig {
            epochs: self.tier().preset(&self.distribution).epochs,
            ..TrainConfig::default()
        });
        if matches!(self.distribution, GameDistribution::ThreePlayerLeduc) && self.train.is_none() {
            t.algorithm = Algorithm::NpcfrPlus;
        }
        t
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.distribution.validate().map_err(|e| HarnessError::Config(format!("distribution: {e}")))?;
        if self.samples == Some(0) {
            return Err(HarnessError::Config("samples: must be at least 1".into()));
        }
        if self.log2_steps.is_some_and(|k| k > 30) {
            return Err(HarnessError::Config("log2_steps: at most 30".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("algorithms: list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds: list is empty".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] <= w[1]) {
            return Err(HarnessError::Config("thresholds: must be strictly descending".into()));
        }
        if let Some(t) = &self.train {
            t.validate().map_err(|e| HarnessError::Config(format!("train: {e}")))?;
        }
        Ok(())
    }
}
