use crate::efg::{GameTree, StrategyProfile, TerminalDistribution};

/// Metrics evaluated on the average strategy at one step of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub step: usize,
    pub nash_gap: f64,
    pub cce_gap: f64,
    pub efm: f64,
    /// Summed positive counterfactual regret divided by the weight sum.
    pub regret_bound: f64,
}

/// Accumulated state of a sequence of strategy profiles `psi^T`.
///
/// Every step enters with a nonnegative weight `w_t` (1 for uniform
/// averaging). The averaged terminal distribution, the per-player average
/// contributions, the average behavior strategy and the CCE deviation weights
/// all use the same weights, so the average behavior strategy induces exactly
/// the product-of-marginals distribution `mu`.
#[derive(Debug, Clone)]
pub struct RunTrace {
    players: usize,
    steps: usize,
    weight_sum: f64,
    chance: Vec<f64>,
    reach_sum: Vec<f64>,
    /// `[player][terminal]`, sum of `w_t d_i(sigma^t)(z)`.
    contribution_sum: Vec<Vec<f64>>,
    /// `[player][terminal]`, sum of `w_t prod_{j != i} d_j(sigma^t)(z)`.
    opponent_sum: Vec<Vec<f64>>,
    /// Sum of `w_t x^t[slot]` (owner realization weights).
    strategy_sum: Vec<f64>,
    /// Sum of `w_t r^t[slot]` (counterfactual regrets).
    regret_sum: Vec<f64>,
    history: Option<Vec<Vec<f64>>>,
    pub(crate) prefix_efm: Vec<f64>,
    pub(crate) evaluations: Vec<Evaluation>,
    last_profile: Vec<f64>,
}

impl RunTrace {
    pub fn new(game: &GameTree, record_history: bool) -> Self {
        let n = game.players();
        let z = game.num_terminals();
        RunTrace {
            players: n,
            steps: 0,
            weight_sum: 0.0,
            chance: game.terminal_chance().to_vec(),
            reach_sum: vec![0.0; z],
            contribution_sum: vec![vec![0.0; z]; n],
            opponent_sum: vec![vec![0.0; z]; n],
            strategy_sum: vec![0.0; game.num_slots()],
            regret_sum: vec![0.0; game.num_slots()],
            history: record_history.then(Vec::new),
            prefix_efm: Vec::new(),
            evaluations: Vec::new(),
            last_profile: Vec::new(),
        }
    }

    /// Uniformly weighted trace of the given profiles.
    pub fn from_profiles(game: &GameTree, profiles: &[StrategyProfile]) -> Self {
        let mut trace = RunTrace::new(game, true);
        for p in profiles {
            trace.push(game, p.probs(), 1.0);
        }
        trace
    }

    /// Records one profile (dense slot probabilities) with weight `weight`
    /// and returns its player contributions, `[player][terminal]`.
    pub fn push(&mut self, game: &GameTree, probs: &[f64], weight: f64) -> Vec<Vec<f64>> {
        let x = game.realization(probs);
        let n = self.players;
        for (s, v) in self.strategy_sum.iter_mut().zip(&x) {
            *s += weight * v;
        }
        let mut contributions = vec![vec![0.0; self.chance.len()]; n];
        let mut d = vec![0.0; n];
        for z in 0..self.chance.len() {
            for (i, di) in d.iter_mut().enumerate() {
                *di = game.last_slot(z, i).map_or(1.0, |q| x[q]);
                contributions[i][z] = *di;
                self.contribution_sum[i][z] += weight * *di;
            }
            let all: f64 = d.iter().product();
            self.reach_sum[z] += weight * self.chance[z] * all;
            for i in 0..n {
                let others: f64 = d
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v)
                    .product();
                self.opponent_sum[i][z] += weight * others;
            }
        }
        self.steps += 1;
        self.weight_sum += weight;
        if let Some(h) = &mut self.history {
            h.push(probs.to_vec());
        }
        self.last_profile.clear();
        self.last_profile.extend_from_slice(probs);
        contributions
    }

    /// Adds weighted counterfactual regrets `w_t r^t` for the last recorded step.
    pub fn add_regrets(&mut self, regrets: &[f64], weight: f64) {
        for (s, r) in self.regret_sum.iter_mut().zip(regrets) {
            *s += weight * r;
        }
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn num_terminals(&self) -> usize {
        self.chance.len()
    }

    pub fn chance(&self) -> &[f64] {
        &self.chance
    }

    /// `d(psi^T)`: the weighted average terminal distribution.
    pub fn avg_reach(&self) -> TerminalDistribution {
        TerminalDistribution(self.reach_sum.iter().map(|r| r / self.weight_sum).collect())
    }

    /// Per-player average contributions, `[player][terminal]`.
    pub fn avg_contributions(&self) -> Vec<Vec<f64>> {
        self.contribution_sum
            .iter()
            .map(|d| d.iter().map(|v| v / self.weight_sum).collect())
            .collect()
    }

    /// Raw weighted sums behind [`avg_reach`](Self::avg_reach) and
    /// [`avg_contributions`](Self::avg_contributions).
    pub fn sums(&self) -> (&[f64], &[Vec<f64>]) {
        (&self.reach_sum, &self.contribution_sum)
    }

    /// Deviation weights for `player`: chance times the averaged product of
    /// the other players' contributions.
    pub fn avg_opponent_weights(&self, player: usize) -> Vec<f64> {
        self.opponent_sum[player]
            .iter()
            .zip(&self.chance)
            .map(|(o, c)| c * o / self.weight_sum)
            .collect()
    }

    /// Average behavior strategy, weighting each step by the owner's own reach.
    pub fn average_strategy(&self, game: &GameTree) -> StrategyProfile {
        let mut probs = vec![0.0; game.num_slots()];
        for info in game.infostates() {
            let total: f64 = info.slots().map(|q| self.strategy_sum[q]).sum();
            for q in info.slots() {
                probs[q] = if total > 0.0 {
                    self.strategy_sum[q] / total
                } else {
                    1.0 / info.num_actions() as f64
                };
            }
        }
        StrategyProfile::from_slots(probs)
    }

    /// Weighted cumulative counterfactual regret per slot.
    pub fn regret_sums(&self) -> &[f64] {
        &self.regret_sum
    }

    /// Profiles of every step, when recorded.
    pub fn history(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }

    /// The most recently recorded profile.
    pub fn last_profile(&self) -> &[f64] {
        &self.last_profile
    }

    /// EFM of every prefix `psi^1..psi^T`, when tracked by the solver.
    pub fn prefix_efm(&self) -> &[f64] {
        &self.prefix_efm
    }

    pub fn evaluations(&self) -> &[Evaluation] {
        &self.evaluations
    }
}
