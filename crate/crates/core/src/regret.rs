//! Online regret minimizers behind one interface, and the counterfactual
//! regret driver that runs one minimizer per infostate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::efg::{self, GameTree, StrategyProfile};
use crate::error::SolveError;
use crate::marginal;
use crate::trace::{Evaluation, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Cfr,
    CfrPlus,
    Pcfr,
    PcfrPlus,
    Spcfr,
    SpcfrPlus,
    Dcfr,
    Lcfr,
    Hedge,
    HedgePlus,
    Npcfr,
    NpcfrPlus,
}

impl Algorithm {
    pub const ALL: [Algorithm; 12] = [
        Algorithm::Cfr,
        Algorithm::CfrPlus,
        Algorithm::Pcfr,
        Algorithm::PcfrPlus,
        Algorithm::Spcfr,
        Algorithm::SpcfrPlus,
        Algorithm::Dcfr,
        Algorithm::Lcfr,
        Algorithm::Hedge,
        Algorithm::HedgePlus,
        Algorithm::Npcfr,
        Algorithm::NpcfrPlus,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Cfr => "cfr",
            Algorithm::CfrPlus => "cfr+",
            Algorithm::Pcfr => "pcfr",
            Algorithm::PcfrPlus => "pcfr+",
            Algorithm::Spcfr => "spcfr",
            Algorithm::SpcfrPlus => "spcfr+",
            Algorithm::Dcfr => "dcfr",
            Algorithm::Lcfr => "lcfr",
            Algorithm::Hedge => "hedge",
            Algorithm::HedgePlus => "hedge+",
            Algorithm::Npcfr => "npcfr",
            Algorithm::NpcfrPlus => "npcfr+",
        }
    }

    /// Cumulative regret is clamped at zero after every update.
    pub fn is_plus(self) -> bool {
        matches!(
            self,
            Algorithm::CfrPlus
                | Algorithm::PcfrPlus
                | Algorithm::SpcfrPlus
                | Algorithm::HedgePlus
                | Algorithm::NpcfrPlus
        )
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Algorithm::Npcfr | Algorithm::NpcfrPlus)
    }

    pub fn default_update_mode(self) -> UpdateMode {
        if self.is_plus() || self == Algorithm::Dcfr {
            UpdateMode::Alternating
        } else {
            UpdateMode::Simultaneous
        }
    }

    pub fn default_averaging(self, dcfr: DcfrParams) -> Averaging {
        match self {
            Algorithm::Dcfr => Averaging::Power(dcfr.gamma),
            Algorithm::Lcfr => Averaging::Linear,
            a if a.is_plus() => Averaging::Linear,
            _ => Averaging::Uniform,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| SolveError::UnknownAlgorithm(s.to_string()))
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    Simultaneous,
    /// One player's infostates update per step, cycling through players.
    Alternating,
}

/// Weight of step `t` in every average the trace keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Uniform,
    Linear,
    /// `t^gamma`; DCFR's `(t/(t+1))^gamma` discounting of the running average.
    Power(f64),
}

impl Averaging {
    pub fn weight(self, t: usize) -> f64 {
        match self {
            Averaging::Uniform => 1.0,
            Averaging::Linear => t as f64,
            Averaging::Power(g) => (t as f64).powf(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfrParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for DcfrParams {
    fn default() -> Self {
        DcfrParams {
            alpha: 1.5,
            beta: 0.0,
            gamma: 2.0,
        }
    }
}

/// Source of the learned regret prediction used by the neural variants.
pub trait RegretPredictor: Send + Sync {
    /// Fresh recurrent state for one infostate.
    fn init_hidden(&self) -> Vec<f64>;

    /// Next prediction `p^{t+1}` from the instantaneous regret `r^t` and the
    /// updated cumulative regret `R^t`, already scaled and combined.
    fn predict(&self, infostate: usize, regret: &[f64], cumulative: &[f64], hidden: &mut Vec<f64>) -> Vec<f64>;

    /// Rejects games the predictor was not built for.
    fn check_game(&self, _game: &GameTree) -> Result<(), String> {
        Ok(())
    }
}

/// A predictor whose network output is identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroPredictor {
    pub alpha: f64,
    /// `true`: `alpha * (r + 0)`; `false`: `alpha * 0`.
    pub residual: bool,
}

impl RegretPredictor for ZeroPredictor {
    fn init_hidden(&self) -> Vec<f64> {
        Vec::new()
    }

    fn predict(&self, _: usize, regret: &[f64], _: &[f64], _: &mut Vec<f64>) -> Vec<f64> {
        if self.residual {
            regret.iter().map(|r| self.alpha * r).collect()
        } else {
            vec![0.0; regret.len()]
        }
    }
}

/// Per-infostate learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerState {
    pub algorithm: Algorithm,
    /// Cumulative regret `R`.
    pub cumulative: Vec<f64>,
    /// Last instantaneous regret `r`.
    pub last_regret: Vec<f64>,
    /// Prediction `p` used by the next strategy.
    pub prediction: Vec<f64>,
    /// Strategy emitted by the last `next_strategy` call.
    pub strategy: Vec<f64>,
    /// Number of observed rewards.
    pub step: u64,
    pub hidden: Vec<f64>,
    pub dcfr: DcfrParams,
    /// Lower bound on the l1 norm of the smoothed regret vector.
    pub smoothing_floor: f64,
}

/// `[v]^+ / ||[v]^+||_1`, uniform when no entry is positive.
pub fn regret_matching(v: &[f64]) -> Vec<f64> {
    let mass: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if mass > 0.0 {
        v.iter().map(|x| x.max(0.0) / mass).collect()
    } else {
        vec![1.0 / v.len() as f64; v.len()]
    }
}

/// Euclidean projection onto `{x >= 0, sum x >= floor}`.
pub fn project_chopped_orthant(y: &[f64], floor: f64) -> Vec<f64> {
    let clamped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() >= floor {
        return clamped;
    }
    // Projection onto the scaled simplex {x >= 0, sum x = floor}.
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - floor) / (k + 1) as f64;
        if v - candidate > 0.0 {
            tau = candidate;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

fn softmax(v: &[f64], scale: f64) -> Vec<f64> {
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = v.iter().map(|x| ((x - m) * scale).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

impl MinimizerState {
    pub fn new(algorithm: Algorithm, num_actions: usize) -> Self {
        MinimizerState {
            algorithm,
            cumulative: vec![0.0; num_actions],
            last_regret: vec![0.0; num_actions],
            prediction: vec![0.0; num_actions],
            strategy: vec![1.0 / num_actions as f64; num_actions],
            step: 0,
            hidden: Vec::new(),
            dcfr: DcfrParams::default(),
            smoothing_floor: 0.1,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.cumulative.len()
    }

    /// Computes the strategy for the coming step and caches it for
    /// [`observe_reward`](Self::observe_reward).
    pub fn next_strategy(&mut self) -> &[f64] {
        let n = self.num_actions();
        self.strategy = match self.algorithm {
            Algorithm::Hedge | Algorithm::HedgePlus => {
                if n == 1 {
                    vec![1.0]
                } else {
                    let t = (self.step + 1) as f64;
                    let rate = ((n as f64).ln() / t).sqrt();
                    softmax(&self.cumulative, rate)
                }
            }
            Algorithm::Spcfr | Algorithm::SpcfrPlus => {
                let y: Vec<f64> = self
                    .cumulative
                    .iter()
                    .zip(&self.prediction)
                    .map(|(r, p)| r + p)
                    .collect();
                let z = project_chopped_orthant(&y, self.smoothing_floor);
                let s: f64 = z.iter().sum();
                z.into_iter().map(|v| v / s).collect()
            }
            _ => {
                let xi: Vec<f64> = self
                    .cumulative
                    .iter()
                    .zip(&self.prediction)
                    .map(|(r, p)| r + p)
                    .collect();
                regret_matching(&xi)
            }
        };
        &self.strategy
    }

    /// Observes the reward vector for the last emitted strategy and updates
    /// the cumulative regret and prediction.
    pub fn observe_reward(
        &mut self,
        reward: &[f64],
        predictor: Option<(&dyn RegretPredictor, usize)>,
    ) -> Result<(), SolveError> {
        let n = self.num_actions();
        if reward.len() != n {
            return Err(SolveError::RewardLength {
                got: reward.len(),
                expected: n,
            });
        }
        let value: f64 = self.strategy.iter().zip(reward).map(|(s, x)| s * x).sum();
        let regret: Vec<f64> = reward.iter().map(|x| x - value).collect();
        self.step += 1;
        let t = self.step as f64;
        match self.algorithm {
            Algorithm::Lcfr => {
                for (c, r) in self.cumulative.iter_mut().zip(&regret) {
                    *c += t * r;
                }
            }
            Algorithm::Dcfr => {
                let pos = t.powf(self.dcfr.alpha) / (t.powf(self.dcfr.alpha) + 1.0);
                let neg = t.powf(self.dcfr.beta) / (t.powf(self.dcfr.beta) + 1.0);
                for (c, r) in self.cumulative.iter_mut().zip(&regret) {
                    *c += r;
                    *c *= if *c > 0.0 { pos } else { neg };
                }
            }
            Algorithm::SpcfrPlus => {
                let y: Vec<f64> = self.cumulative.iter().zip(&regret).map(|(c, r)| c + r).collect();
                self.cumulative = project_chopped_orthant(&y, self.smoothing_floor);
            }
            a => {
                for (c, r) in self.cumulative.iter_mut().zip(&regret) {
                    *c += r;
                    if a.is_plus() {
                        *c = c.max(0.0);
                    }
                }
            }
        }
        match self.algorithm {
            Algorithm::Pcfr | Algorithm::PcfrPlus | Algorithm::Spcfr | Algorithm::SpcfrPlus => {
                self.prediction.copy_from_slice(&regret);
            }
            Algorithm::Npcfr | Algorithm::NpcfrPlus => {
                let (predictor, infostate) = predictor.ok_or_else(|| {
                    SolveError::Config("neural minimizer observed a reward without a predictor".into())
                })?;
                self.prediction = predictor.predict(infostate, &regret, &self.cumulative, &mut self.hidden);
            }
            _ => {}
        }
        self.last_regret = regret;
        Ok(())
    }
}

/// Configuration of one counterfactual regret solve.
#[derive(Clone)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    pub update: UpdateMode,
    pub steps: usize,
    pub averaging: Averaging,
    /// Steps (1-based, ascending) at which the average strategy is evaluated.
    pub checkpoints: Vec<usize>,
    pub dcfr: DcfrParams,
    pub smoothing_floor: f64,
    pub record_history: bool,
    pub track_prefix_efm: bool,
    pub predictor: Option<Arc<dyn RegretPredictor>>,
}

impl fmt::Debug for SolveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolveConfig")
            .field("algorithm", &self.algorithm)
            .field("update", &self.update)
            .field("steps", &self.steps)
            .field("averaging", &self.averaging)
            .field("checkpoints", &self.checkpoints)
            .field("predictor", &self.predictor.is_some())
            .finish()
    }
}

impl SolveConfig {
    /// Defaults for `algorithm`: plus variants and DCFR alternate and use
    /// weighted averaging, everything else is simultaneous and uniform.
    pub fn new(algorithm: Algorithm, steps: usize) -> Self {
        let dcfr = DcfrParams::default();
        SolveConfig {
            algorithm,
            update: algorithm.default_update_mode(),
            steps,
            averaging: algorithm.default_averaging(dcfr),
            checkpoints: Vec::new(),
            dcfr,
            smoothing_floor: 0.1,
            record_history: false,
            track_prefix_efm: false,
            predictor: None,
        }
    }

    pub fn with_update(mut self, update: UpdateMode) -> Self {
        self.update = update;
        self
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<usize>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    /// Evaluate at `1, 2, 4, ..., 2^k <= steps`.
    pub fn with_power_of_two_checkpoints(mut self) -> Self {
        self.checkpoints = power_of_two_schedule(self.steps);
        self
    }

    pub fn with_predictor(mut self, predictor: Arc<dyn RegretPredictor>) -> Self {
        self.predictor = Some(predictor);
        self
    }

    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    pub fn with_prefix_efm(mut self) -> Self {
        self.track_prefix_efm = true;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.steps == 0 {
            return Err(SolveError::Config("step budget must be at least 1".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SolveError::Config("checkpoints must be strictly ascending".into()));
        }
        if self.algorithm.is_neural() && self.predictor.is_none() {
            return Err(SolveError::Config(format!(
                "{} needs a predictor checkpoint",
                self.algorithm
            )));
        }
        Ok(())
    }
}

/// `1, 2, 4, ...` up to `steps`.
pub fn power_of_two_schedule(steps: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |s| s.checked_mul(2))
        .take_while(|&s| s <= steps)
        .collect()
}

/// Counterfactual rewards for every slot under `probs`, given the player
/// contributions of `probs`.
pub fn counterfactual_rewards(game: &GameTree, probs: &[f64], contributions: &[Vec<f64>]) -> Vec<f64> {
    let n = game.players();
    let mut rewards = vec![0.0; game.num_slots()];
    let chance = game.terminal_chance();
    for i in 0..n {
        let weights: Vec<f64> = (0..game.num_terminals())
            .map(|z| {
                chance[z]
                    * (0..n)
                        .filter(|&j| j != i)
                        .map(|j| contributions[j][z])
                        .product::<f64>()
            })
            .collect();
        let (values, _) = game.counterfactual_values(i, probs, &weights);
        for s in game.player_infostates(i) {
            let slots = game.infostate(s).slots();
            rewards[slots.clone()].copy_from_slice(&values[slots]);
        }
    }
    rewards
}

/// Evaluates the average strategy of `trace` and the trace metrics.
pub fn evaluate(game: &GameTree, trace: &RunTrace) -> Result<Evaluation, SolveError> {
    let average = trace.average_strategy(game);
    let metric = |e: crate::error::MetricError| match e {
        crate::error::MetricError::Game(g) => SolveError::Game(g),
        other => SolveError::Config(other.to_string()),
    };
    Ok(Evaluation {
        step: trace.steps(),
        nash_gap: efg::nash_gap(game, &average)?,
        cce_gap: efg::cce_gap(game, trace).map_err(metric)?,
        efm: marginal::efm(trace).map_err(metric)?,
        regret_bound: sum_positive_cf_regret(game, trace) / trace.weight_sum(),
    })
}

/// Runs counterfactual regret minimization with one minimizer per infostate.
pub fn cfr_solve(game: &GameTree, config: &SolveConfig) -> Result<RunTrace, SolveError> {
    config.validate()?;
    if let Some(p) = &config.predictor {
        p.check_game(game).map_err(SolveError::Config)?;
    }
    let n = game.players();
    let mut minimizers: Vec<MinimizerState> = game
        .infostates()
        .iter()
        .map(|info| {
            let mut m = MinimizerState::new(config.algorithm, info.num_actions());
            m.dcfr = config.dcfr;
            m.smoothing_floor = config.smoothing_floor;
            if let Some(p) = &config.predictor {
                m.hidden = p.init_hidden();
            }
            m
        })
        .collect();
    let mut trace = RunTrace::new(game, config.record_history);
    let mut probs = vec![0.0; game.num_slots()];
    let mut next_checkpoint = config.checkpoints.iter().peekable();

    for t in 1..=config.steps {
        for (info, m) in game.infostates().iter().zip(minimizers.iter_mut()) {
            probs[info.slots()].copy_from_slice(m.next_strategy());
        }
        let weight = config.averaging.weight(t);
        let contributions = trace.push(game, &probs, weight);
        let rewards = counterfactual_rewards(game, &probs, &contributions);

        let mut regrets = vec![0.0; game.num_slots()];
        for info in game.infostates() {
            let slots = info.slots();
            let value: f64 = slots.clone().map(|q| probs[q] * rewards[q]).sum();
            for q in slots {
                regrets[q] = rewards[q] - value;
            }
        }
        trace.add_regrets(&regrets, weight);

        let acting = match config.update {
            UpdateMode::Simultaneous => None,
            UpdateMode::Alternating => Some((t - 1) % n),
        };
        for (s, (info, m)) in game.infostates().iter().zip(minimizers.iter_mut()).enumerate() {
            if acting.is_some_and(|p| p != info.player) {
                continue;
            }
            let predictor = config.predictor.as_deref().map(|p| (p, s));
            m.observe_reward(&rewards[info.slots()], predictor)?;
        }

        if config.track_prefix_efm {
            let e = marginal::efm(&trace).map_err(|e| SolveError::Config(e.to_string()))?;
            trace.prefix_efm.push(e);
        }
        if next_checkpoint.peek() == Some(&&t) {
            next_checkpoint.next();
            let eval = evaluate(game, &trace)?;
            trace.evaluations.push(eval);
        }
    }
    Ok(trace)
}

/// `sum_i sum_{s in S_i} max(||R_i(s)||_inf, 0)` over the trace's weighted
/// counterfactual regrets. Divided by the weight sum it bounds the CCE gap.
pub fn sum_positive_cf_regret(game: &GameTree, trace: &RunTrace) -> f64 {
    let r = trace.regret_sums();
    game.infostates()
        .iter()
        .map(|info| {
            info.slots()
                .map(|q| r[q])
                .fold(0.0_f64, f64::max)
        })
        .sum()
}

/// Convenience: the average strategy of a finished solve.
pub fn average_strategy(game: &GameTree, trace: &RunTrace) -> StrategyProfile {
    trace.average_strategy(game)
}
