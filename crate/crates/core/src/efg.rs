//! Infostate-annotated extensive-form games.
//!
//! A [`GameTree`] is built once from a recursive [`TreeSpec`] and is immutable
//! afterwards. Construction compiles a few flat tables that every solver in the
//! crate works from:
//!
//! * infostates are numbered by the owner's depth (number of own decisions on
//!   the path), ties broken by depth-first discovery order;
//! * every `(infostate, action)` pair gets a *slot*, contiguous per infostate,
//!   so a behavior strategy profile is one dense `Vec<f64>` over slots;
//! * terminals are numbered in depth-first discovery order and carry their
//!   chance reach and, per player, the last slot of that player on the path.
//!
//! With this layout the reach of a terminal factorizes as
//! `d_c(z) * prod_i x_i[last_i(z)]`, where `x_i` is player `i`'s realization
//! plan, and counterfactual values and best responses are single bottom-up
//! sweeps over infostates in reverse id order.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::GameError;
use crate::trace::RunTrace;

/// Tolerance on chance probabilities summing to one.
pub const CHANCE_TOLERANCE: f64 = 1e-12;

/// Recursive description of a game, consumed by [`GameTree::new`].
#[derive(Debug, Clone)]
pub enum TreeSpec {
    Decision {
        player: usize,
        /// Identifies the infostate among `player`'s infostates.
        infostate: String,
        actions: Vec<(String, TreeSpec)>,
    },
    Chance {
        outcomes: Vec<(f64, TreeSpec)>,
    },
    Terminal {
        utilities: Vec<f64>,
    },
}

impl TreeSpec {
    pub fn terminal(utilities: Vec<f64>) -> Self {
        TreeSpec::Terminal { utilities }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Decision {
        player: usize,
        infostate: usize,
        children: Vec<usize>,
    },
    Chance {
        outcomes: Vec<(f64, usize)>,
    },
    Terminal {
        terminal: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infostate {
    pub player: usize,
    pub key: String,
    pub actions: Vec<String>,
    /// First slot of this infostate; its actions occupy `offset..offset + actions.len()`.
    pub offset: usize,
    /// Owner's previous `(infostate, action)` slot, `None` at the owner's first decision.
    pub parent_slot: Option<usize>,
    /// Number of owner decisions before this infostate.
    pub depth: usize,
}

impl Infostate {
    pub fn slots(&self) -> Range<usize> {
        self.offset..self.offset + self.actions.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone)]
pub struct GameTree {
    players: usize,
    nodes: Vec<Node>,
    infostates: Vec<Infostate>,
    slot_infostate: Vec<usize>,
    terminal_chance: Vec<f64>,
    /// `z * players + i`
    terminal_utilities: Vec<f64>,
    /// `z * players + i`
    terminal_last_slot: Vec<Option<usize>>,
    max_actions: usize,
}

struct RawInfostate {
    player: usize,
    key: String,
    actions: Vec<String>,
    parent: Option<(usize, usize)>,
    depth: usize,
}

struct Builder {
    players: usize,
    nodes: Vec<Node>,
    infostates: Vec<RawInfostate>,
    index: HashMap<(usize, String), usize>,
    terminal_chance: Vec<f64>,
    terminal_utilities: Vec<f64>,
    /// `(raw infostate, action)` per player, resolved to slots after renumbering.
    terminal_last: Vec<Option<(usize, usize)>>,
}

impl Builder {
    fn build(
        &mut self,
        spec: TreeSpec,
        chance: f64,
        history: &mut Vec<Option<(usize, usize)>>,
    ) -> Result<usize, GameError> {
        let id = self.nodes.len();
        match spec {
            TreeSpec::Terminal { utilities } => {
                if utilities.len() != self.players {
                    return Err(GameError::UtilityArity {
                        got: utilities.len(),
                        expected: self.players,
                    });
                }
                let terminal = self.terminal_chance.len();
                self.terminal_chance.push(chance);
                self.terminal_utilities.extend_from_slice(&utilities);
                self.terminal_last.extend_from_slice(history);
                self.nodes.push(Node::Terminal { terminal });
            }
            TreeSpec::Chance { outcomes } => {
                let sum: f64 = outcomes.iter().map(|(p, _)| *p).sum();
                if outcomes.is_empty()
                    || outcomes.iter().any(|(p, _)| !(*p >= 0.0) || !p.is_finite())
                    || (sum - 1.0).abs() > CHANCE_TOLERANCE
                {
                    return Err(GameError::InvalidChance { sum });
                }
                self.nodes.push(Node::Chance {
                    outcomes: Vec::new(),
                });
                let mut built = Vec::with_capacity(outcomes.len());
                for (p, child) in outcomes {
                    let c = self.build(child, chance * p, history)?;
                    built.push((p, c));
                }
                self.nodes[id] = Node::Chance { outcomes: built };
            }
            TreeSpec::Decision {
                player,
                infostate,
                actions,
            } => {
                if player >= self.players {
                    return Err(GameError::UnknownPlayer { player });
                }
                if actions.is_empty() {
                    return Err(GameError::NoActions { key: infostate });
                }
                let labels: Vec<String> = actions.iter().map(|(a, _)| a.clone()).collect();
                let parent = history[player];
                let depth = match parent {
                    None => 0,
                    Some((s, _)) => self.infostates[s].depth + 1,
                };
                let raw = match self.index.get(&(player, infostate.clone())) {
                    Some(&s) => {
                        let existing = &self.infostates[s];
                        if existing.actions != labels {
                            return Err(GameError::InconsistentActions { key: infostate });
                        }
                        if existing.parent != parent {
                            return Err(GameError::ImperfectRecall { key: infostate });
                        }
                        s
                    }
                    None => {
                        let s = self.infostates.len();
                        self.index.insert((player, infostate.clone()), s);
                        self.infostates.push(RawInfostate {
                            player,
                            key: infostate,
                            actions: labels,
                            parent,
                            depth,
                        });
                        s
                    }
                };
                self.nodes.push(Node::Decision {
                    player,
                    infostate: raw,
                    children: Vec::new(),
                });
                let mut children = Vec::with_capacity(actions.len());
                for (a, (_, child)) in actions.into_iter().enumerate() {
                    let saved = history[player];
                    history[player] = Some((raw, a));
                    let c = self.build(child, chance, history)?;
                    history[player] = saved;
                    children.push(c);
                }
                if let Node::Decision { children: ch, .. } = &mut self.nodes[id] {
                    *ch = children;
                }
            }
        }
        Ok(id)
    }
}

impl GameTree {
    /// Builds and validates a game from its recursive description.
    pub fn new(players: usize, root: TreeSpec) -> Result<Self, GameError> {
        if players == 0 {
            return Err(GameError::NoPlayers);
        }
        let mut b = Builder {
            players,
            nodes: Vec::new(),
            infostates: Vec::new(),
            index: HashMap::new(),
            terminal_chance: Vec::new(),
            terminal_utilities: Vec::new(),
            terminal_last: Vec::new(),
        };
        let mut history = vec![None; players];
        b.build(root, 1.0, &mut history)?;

        // Renumber infostates by (depth, discovery order).
        let mut order: Vec<usize> = (0..b.infostates.len()).collect();
        order.sort_by_key(|&s| (b.infostates[s].depth, s));
        let mut new_id = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let mut offsets = vec![0; order.len()];
        let mut next = 0;
        for (new, &old) in order.iter().enumerate() {
            offsets[new] = next;
            next += b.infostates[old].actions.len();
        }
        let slot_of = |(raw, a): (usize, usize)| offsets[new_id[raw]] + a;

        let mut infostates = Vec::with_capacity(order.len());
        let mut slot_infostate = Vec::with_capacity(next);
        for (new, &old) in order.iter().enumerate() {
            let raw = &b.infostates[old];
            slot_infostate.extend(std::iter::repeat_n(new, raw.actions.len()));
            infostates.push(Infostate {
                player: raw.player,
                key: raw.key.clone(),
                actions: raw.actions.clone(),
                offset: offsets[new],
                parent_slot: raw.parent.map(slot_of),
                depth: raw.depth,
            });
        }
        for node in &mut b.nodes {
            if let Node::Decision { infostate, .. } = node {
                *infostate = new_id[*infostate];
            }
        }
        let terminal_last_slot = b.terminal_last.iter().map(|h| h.map(slot_of)).collect();
        let max_actions = infostates.iter().map(|s| s.actions.len()).max().unwrap_or(0);
        Ok(GameTree {
            players,
            nodes: b.nodes,
            infostates,
            slot_infostate,
            terminal_chance: b.terminal_chance,
            terminal_utilities: b.terminal_utilities,
            terminal_last_slot,
            max_actions,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn infostates(&self) -> &[Infostate] {
        &self.infostates
    }

    pub fn infostate(&self, s: usize) -> &Infostate {
        &self.infostates[s]
    }

    pub fn num_infostates(&self) -> usize {
        self.infostates.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slot_infostate.len()
    }

    pub fn slot_infostate(&self, slot: usize) -> usize {
        self.slot_infostate[slot]
    }

    pub fn num_terminals(&self) -> usize {
        self.terminal_chance.len()
    }

    pub fn max_actions(&self) -> usize {
        self.max_actions
    }

    /// Infostates owned by `player`, in id order.
    pub fn player_infostates(&self, player: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.infostates.len()).filter(move |&s| self.infostates[s].player == player)
    }

    pub fn find_infostate(&self, player: usize, key: &str) -> Option<usize> {
        self.infostates
            .iter()
            .position(|s| s.player == player && s.key == key)
    }

    /// Chance contribution `d_c(z)` per terminal.
    pub fn terminal_chance(&self) -> &[f64] {
        &self.terminal_chance
    }

    pub fn utility(&self, terminal: usize, player: usize) -> f64 {
        self.terminal_utilities[terminal * self.players + player]
    }

    pub fn terminal_utilities(&self, terminal: usize) -> &[f64] {
        let n = self.players;
        &self.terminal_utilities[terminal * n..(terminal + 1) * n]
    }

    /// Last slot of `player` on the path to `terminal`.
    pub fn last_slot(&self, terminal: usize, player: usize) -> Option<usize> {
        self.terminal_last_slot[terminal * self.players + player]
    }

    /// `max_i max_z |u_i(z)|`.
    pub fn max_abs_utility(&self) -> f64 {
        self.terminal_utilities
            .iter()
            .fold(0.0_f64, |m, u| m.max(u.abs()))
    }

    /// Realization plan of a (possibly partial) profile: `x[slot]` is the
    /// product of the owner's probabilities along the path up to and including
    /// the slot.
    pub fn realization(&self, probs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; probs.len()];
        for info in &self.infostates {
            let base = info.parent_slot.map_or(1.0, |p| x[p]);
            for slot in info.slots() {
                x[slot] = base * probs[slot];
            }
        }
        x
    }

    /// Player contributions `d_i(z)` for every terminal, as `[player][terminal]`.
    pub fn contributions(&self, probs: &[f64]) -> Vec<Vec<f64>> {
        let x = self.realization(probs);
        (0..self.players)
            .map(|i| {
                (0..self.num_terminals())
                    .map(|z| self.last_slot(z, i).map_or(1.0, |q| x[q]))
                    .collect()
            })
            .collect()
    }

    /// Counterfactual action values for every slot of `player` given terminal
    /// weights `w(z)` (opponents' and chance's reach). Slots of other players
    /// are left at zero. Returns `(slot values, root value)` where the root
    /// value is `sum_z w(z) x_i(z) u_i(z)` under `probs`.
    pub fn counterfactual_values(&self, player: usize, probs: &[f64], weights: &[f64]) -> (Vec<f64>, f64) {
        let mut values = vec![0.0; self.num_slots()];
        let mut root = 0.0;
        for z in 0..self.num_terminals() {
            let v = weights[z] * self.utility(z, player);
            match self.last_slot(z, player) {
                Some(q) => values[q] += v,
                None => root += v,
            }
        }
        for info in self.infostates.iter().rev() {
            if info.player != player {
                continue;
            }
            let ev: f64 = info.slots().map(|q| probs[q] * values[q]).sum();
            match info.parent_slot {
                Some(p) => values[p] += ev,
                None => root += ev,
            }
        }
        (values, root)
    }

    /// Best response of `player` to terminal weights `w(z)`. Returns the value
    /// and the chosen action per infostate of `player` (other entries are 0).
    pub fn best_response_to_weights(&self, player: usize, weights: &[f64]) -> (f64, Vec<usize>) {
        let mut values = vec![0.0; self.num_slots()];
        let mut choice = vec![0; self.num_infostates()];
        let mut root = 0.0;
        for z in 0..self.num_terminals() {
            let v = weights[z] * self.utility(z, player);
            match self.last_slot(z, player) {
                Some(q) => values[q] += v,
                None => root += v,
            }
        }
        for (s, info) in self.infostates.iter().enumerate().rev() {
            if info.player != player {
                continue;
            }
            let (best, value) = info
                .slots()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(ba, bv), (a, q)| {
                    if values[q] > bv {
                        (a, values[q])
                    } else {
                        (ba, bv)
                    }
                });
            choice[s] = best;
            match info.parent_slot {
                Some(p) => values[p] += value,
                None => root += value,
            }
        }
        (root, choice)
    }
}

/// Behavior strategy profile: one probability per slot.
///
/// Entries of infostates that were never set are NaN; operations that need
/// them report [`GameError::MissingInfostate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    probs: Vec<f64>,
}

impl StrategyProfile {
    pub fn uniform(game: &GameTree) -> Self {
        let mut probs = vec![0.0; game.num_slots()];
        for info in game.infostates() {
            let p = 1.0 / info.num_actions() as f64;
            probs[info.slots()].iter_mut().for_each(|x| *x = p);
        }
        StrategyProfile { probs }
    }

    /// A profile with every infostate unset.
    pub fn empty(game: &GameTree) -> Self {
        StrategyProfile {
            probs: vec![f64::NAN; game.num_slots()],
        }
    }

    pub fn from_slots(probs: Vec<f64>) -> Self {
        StrategyProfile { probs }
    }

    /// Builds a profile from `(player, infostate key) -> probabilities`.
    pub fn from_map(
        game: &GameTree,
        map: &HashMap<(usize, String), Vec<f64>>,
    ) -> Result<Self, GameError> {
        let mut profile = Self::empty(game);
        for (s, info) in game.infostates().iter().enumerate() {
            let probs = map
                .get(&(info.player, info.key.clone()))
                .ok_or_else(|| GameError::MissingInfostate {
                    player: info.player,
                    key: info.key.clone(),
                })?;
            profile.set(game, s, probs)?;
        }
        Ok(profile)
    }

    pub fn set(&mut self, game: &GameTree, infostate: usize, probs: &[f64]) -> Result<(), GameError> {
        let info = game.infostate(infostate);
        if probs.len() != info.num_actions() {
            return Err(GameError::Contract(format!(
                "infostate `{}` has {} actions, got {} probabilities",
                info.key,
                info.num_actions(),
                probs.len()
            )));
        }
        self.probs[info.slots()].copy_from_slice(probs);
        Ok(())
    }

    pub fn get<'a>(&'a self, game: &GameTree, infostate: usize) -> &'a [f64] {
        &self.probs[game.infostate(infostate).slots()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    /// Checks that every infostate (optionally excluding `skip_player`'s) is
    /// set and lies in the simplex.
    pub fn check_coverage(&self, game: &GameTree, skip_player: Option<usize>) -> Result<(), GameError> {
        if self.probs.len() != game.num_slots() {
            return Err(GameError::Contract(format!(
                "profile has {} slots, game has {}",
                self.probs.len(),
                game.num_slots()
            )));
        }
        for info in game.infostates() {
            if Some(info.player) == skip_player {
                continue;
            }
            let p = &self.probs[info.slots()];
            if p.iter().any(|x| x.is_nan()) {
                return Err(GameError::MissingInfostate {
                    player: info.player,
                    key: info.key.clone(),
                });
            }
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&x| x < -1e-12) || (sum - 1.0).abs() > 1e-9 {
                return Err(GameError::Contract(format!(
                    "strategy at `{}` is not a distribution: {:?}",
                    info.key, p
                )));
            }
        }
        Ok(())
    }
}

/// Distribution over terminals, dense in terminal order.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalDistribution(pub Vec<f64>);

impl TerminalDistribution {
    pub fn point_mass(game: &GameTree, terminal: usize) -> Self {
        let mut d = vec![0.0; game.num_terminals()];
        d[terminal] = 1.0;
        TerminalDistribution(d)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Per-terminal chance and player contributions to the reach probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachDecomposition {
    pub chance: Vec<f64>,
    /// `[player][terminal]`
    pub players: Vec<Vec<f64>>,
}

impl ReachDecomposition {
    pub fn reach(&self) -> TerminalDistribution {
        TerminalDistribution(
            (0..self.chance.len())
                .map(|z| self.chance[z] * self.players.iter().map(|d| d[z]).product::<f64>())
                .collect(),
        )
    }

    /// `d_c(z) * prod_{j != player} d_j(z)`.
    pub fn opponent_weights(&self, player: usize) -> Vec<f64> {
        (0..self.chance.len())
            .map(|z| {
                self.chance[z]
                    * self
                        .players
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != player)
                        .map(|(_, d)| d[z])
                        .product::<f64>()
            })
            .collect()
    }
}

pub fn reach_decompose(game: &GameTree, profile: &StrategyProfile) -> Result<ReachDecomposition, GameError> {
    profile.check_coverage(game, None)?;
    Ok(ReachDecomposition {
        chance: game.terminal_chance().to_vec(),
        players: game.contributions(profile.probs()),
    })
}

pub fn expected_utility(game: &GameTree, dist: &TerminalDistribution) -> Result<Vec<f64>, GameError> {
    if dist.0.len() != game.num_terminals() {
        return Err(GameError::Contract(format!(
            "distribution has {} entries, game has {} terminals",
            dist.0.len(),
            game.num_terminals()
        )));
    }
    let total = dist.total();
    if (total - 1.0).abs() > 1e-6 {
        return Err(GameError::Contract(format!(
            "terminal distribution sums to {total}"
        )));
    }
    let mut u = vec![0.0; game.players()];
    for (z, &p) in dist.0.iter().enumerate() {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += p * game.utility(z, i);
        }
    }
    Ok(u)
}

/// Best response of `responder` to the rest of `profile`.
///
/// Returns the best-response value and `profile` with the responder's
/// infostates replaced by a pure best response.
pub fn best_response(
    game: &GameTree,
    profile: &StrategyProfile,
    responder: usize,
) -> Result<(f64, StrategyProfile), GameError> {
    if responder >= game.players() {
        return Err(GameError::UnknownPlayer { player: responder });
    }
    profile.check_coverage(game, Some(responder))?;
    let mut contributions = game.contributions(profile.probs());
    contributions[responder].iter_mut().for_each(|d| *d = 1.0);
    let decomposition = ReachDecomposition {
        chance: game.terminal_chance().to_vec(),
        players: contributions,
    };
    let weights = decomposition.opponent_weights(responder);
    let (value, choice) = game.best_response_to_weights(responder, &weights);
    let mut out = profile.clone();
    for s in game.player_infostates(responder) {
        let info = game.infostate(s);
        for (a, slot) in info.slots().enumerate() {
            out.probs[slot] = if a == choice[s] { 1.0 } else { 0.0 };
        }
    }
    Ok((value, out))
}

/// Per-player best-response gains against `profile`.
pub fn nash_gaps(game: &GameTree, profile: &StrategyProfile) -> Result<Vec<f64>, GameError> {
    let dec = reach_decompose(game, profile)?;
    let reach = dec.reach();
    Ok((0..game.players())
        .map(|i| {
            let weights = dec.opponent_weights(i);
            let (br, _) = game.best_response_to_weights(i, &weights);
            let u: f64 = reach
                .0
                .iter()
                .enumerate()
                .map(|(z, p)| p * game.utility(z, i))
                .sum();
            br - u
        })
        .collect())
}

/// Maximum unilateral gain any player has against `profile`.
pub fn nash_gap(game: &GameTree, profile: &StrategyProfile) -> Result<f64, GameError> {
    Ok(nash_gaps(game, profile)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// CCE gap of the (weighted) empirical joint distribution recorded in `trace`.
///
/// Each player best-responds to the time-averaged product of opponents' and
/// chance's reach, and is compared with its utility under the averaged
/// terminal distribution. Negative values mean every deviation loses.
pub fn cce_gap(game: &GameTree, trace: &RunTrace) -> Result<f64, crate::error::MetricError> {
    if trace.steps() == 0 {
        return Err(crate::error::MetricError::EmptyTrace);
    }
    if trace.num_terminals() != game.num_terminals() || trace.players() != game.players() {
        return Err(crate::error::MetricError::Size(
            "trace was recorded on a different game".into(),
        ));
    }
    let avg = trace.avg_reach();
    let mut gap = f64::NEG_INFINITY;
    for i in 0..game.players() {
        let weights = trace.avg_opponent_weights(i);
        let (br, _) = game.best_response_to_weights(i, &weights);
        let u: f64 = avg
            .0
            .iter()
            .enumerate()
            .map(|(z, p)| p * game.utility(z, i))
            .sum();
        gap = gap.max(br - u);
    }
    Ok(gap)
}
