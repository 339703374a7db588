//! Concrete games: biased Shapley, biased Leduc poker for two or three
//! players, small matrix and toy trees, and a brute-force normal-form
//! converter for tiny trees.

use serde::{Deserialize, Serialize};

use crate::efg::{GameTree, StrategyProfile, TreeSpec};
use crate::error::GameError;

/// Default cap on the number of joint pure profiles in [`to_normal_form`].
pub const DEFAULT_NORMAL_FORM_CAP: usize = 10_000;

/// Two-player simultaneous-move game given by payoff matrices, encoded
/// sequentially: the row player moves first, the column player acts in a
/// single infostate covering every row.
pub fn bimatrix_game(row: &[Vec<f64>], col: &[Vec<f64>]) -> Result<GameTree, GameError> {
    if row.is_empty() || row.len() != col.len() {
        return Err(GameError::Config("payoff matrices must have equal, nonzero row counts".into()));
    }
    let width = row[0].len();
    if width == 0 || row.iter().chain(col).any(|r| r.len() != width) {
        return Err(GameError::Config("payoff matrices must be rectangular and equal-sized".into()));
    }
    let actions = (0..row.len())
        .map(|r| {
            let responses = (0..width)
                .map(|c| (format!("{}", c + 1), TreeSpec::terminal(vec![row[r][c], col[r][c]])))
                .collect();
            (
                format!("{}", r + 1),
                TreeSpec::Decision {
                    player: 1,
                    infostate: "col".into(),
                    actions: responses,
                },
            )
        })
        .collect();
    GameTree::new(
        2,
        TreeSpec::Decision {
            player: 0,
            infostate: "row".into(),
            actions,
        },
    )
}

/// A bimatrix game preceded by a chance move neither player observes; the
/// payoff matrices depend on the chance outcome.
pub fn chance_bimatrix_game(
    chance: &[f64],
    row: &[Vec<Vec<f64>>],
    col: &[Vec<Vec<f64>>],
) -> Result<GameTree, GameError> {
    if chance.len() != row.len() || chance.len() != col.len() {
        return Err(GameError::Config("one payoff pair per chance outcome required".into()));
    }
    let outcomes = chance
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let actions = (0..row[k].len())
                .map(|r| {
                    let responses = (0..row[k][r].len())
                        .map(|c| (format!("{}", c + 1), TreeSpec::terminal(vec![row[k][r][c], col[k][r][c]])))
                        .collect();
                    (
                        format!("{}", r + 1),
                        TreeSpec::Decision {
                            player: 1,
                            infostate: "col".into(),
                            actions: responses,
                        },
                    )
                })
                .collect();
            (
                p,
                TreeSpec::Decision {
                    player: 0,
                    infostate: "row".into(),
                    actions,
                },
            )
        })
        .collect();
    GameTree::new(2, TreeSpec::Chance { outcomes })
}

/// Matching pennies: the row player wins 1 on a match, the column player on a mismatch.
pub fn matching_pennies() -> GameTree {
    let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let b = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
    bimatrix_game(&a, &b).expect("static game is valid")
}

/// Kuhn-like toy: chance deals one of two cards to player one, who sees it
/// and picks `a`/`b`; player two sees only that action and picks `x`/`y`.
/// Each player has two infostates with two actions.
pub fn card_toy_game(payoff: impl Fn(usize, usize, usize) -> [f64; 2]) -> GameTree {
    let outcomes = (0..2)
        .map(|card| {
            let actions = ["a", "b"]
                .iter()
                .enumerate()
                .map(|(a1, l1)| {
                    let responses = ["x", "y"]
                        .iter()
                        .enumerate()
                        .map(|(a2, l2)| (l2.to_string(), TreeSpec::terminal(payoff(card, a1, a2).to_vec())))
                        .collect();
                    (
                        l1.to_string(),
                        TreeSpec::Decision {
                            player: 1,
                            infostate: format!("after-{l1}"),
                            actions: responses,
                        },
                    )
                })
                .collect();
            (
                0.5,
                TreeSpec::Decision {
                    player: 0,
                    infostate: format!("card-{card}"),
                    actions,
                },
            )
        })
        .collect();
    GameTree::new(2, TreeSpec::Chance { outcomes }).expect("static game is valid")
}

fn biased_shapley_matrices(eta: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = vec![
        vec![1.0, 0.0, eta],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let b = vec![
        vec![0.0, 1.0, eta],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ];
    (a, b)
}

/// Shapley's game with payoff `eta` to both players at (row 1, column 3).
pub fn make_biased_shapley(eta: f64) -> Result<GameTree, GameError> {
    if !eta.is_finite() {
        return Err(GameError::Config(format!("eta must be finite, got {eta}")));
    }
    let (a, b) = biased_shapley_matrices(eta);
    bimatrix_game(&a, &b)
}

/// The unique Nash equilibrium of biased Shapley, from the indifference conditions:
/// row `(1, 1-eta, 1)/(3-eta)`, column `(1-eta, 1, 1)/(3-eta)`.
pub fn analytic_nash_biased_shapley(eta: f64) -> Result<StrategyProfile, GameError> {
    if !eta.is_finite() || eta >= 3.0 {
        return Err(GameError::Domain { eta });
    }
    let game = make_biased_shapley(eta)?;
    let k = 3.0 - eta;
    let mut profile = StrategyProfile::empty(&game);
    profile.set(&game, 0, &[1.0 / k, (1.0 - eta) / k, 1.0 / k])?;
    profile.set(&game, 1, &[(1.0 - eta) / k, 1.0 / k, 1.0 / k])?;
    Ok(profile)
}

/// The correlated distribution that regret dynamics reach on Shapley's game:
/// 1/6 on each of the six cells where one player scores.
pub fn delta_star() -> [[f64; 3]; 3] {
    let s = 1.0 / 6.0;
    [[s, s, 0.0], [0.0, s, s], [s, 0.0, s]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeducSpec {
    pub players: usize,
    /// Fraction of the standard tie payout tying players receive.
    pub beta: f64,
    pub ante: f64,
    pub bet_sizes: [f64; 2],
    pub max_bets_per_round: usize,
}

impl LeducSpec {
    pub fn new(players: usize, beta: f64) -> Self {
        LeducSpec {
            players,
            beta,
            ante: 1.0,
            bet_sizes: [2.0, 4.0],
            max_bets_per_round: 2,
        }
    }

    pub fn ranks(&self) -> usize {
        self.players + 1
    }

    /// Two suits per rank.
    pub fn deck_size(&self) -> usize {
        2 * self.ranks()
    }

    fn validate(&self) -> Result<(), GameError> {
        if !(2..=3).contains(&self.players) {
            return Err(GameError::Config(format!(
                "Leduc supports 2 or 3 players, got {}",
                self.players
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(GameError::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct LeducState {
    cards: Vec<usize>,
    public: Option<usize>,
    counts: Vec<usize>,
    round: usize,
    contributed: Vec<f64>,
    folded: Vec<bool>,
    /// Highest contribution in the current round.
    round_bet: f64,
    round_contrib: Vec<f64>,
    acted: Vec<bool>,
    bets: usize,
    history: String,
}

struct LeducBuilder {
    spec: LeducSpec,
}

impl LeducBuilder {
    fn deal(&self, state: LeducState) -> TreeSpec {
        let n = self.spec.players;
        if state.cards.len() < n || (state.round == 1 && state.public.is_none()) {
            let remaining: usize = state.counts.iter().sum();
            let outcomes = (0..self.spec.ranks())
                .filter(|&r| state.counts[r] > 0)
                .map(|r| {
                    let p = state.counts[r] as f64 / remaining as f64;
                    let mut next = state.clone();
                    next.counts[r] -= 1;
                    if next.cards.len() < n {
                        next.cards.push(r);
                    } else {
                        next.public = Some(r);
                    }
                    (p, self.deal(next))
                })
                .collect();
            return TreeSpec::Chance { outcomes };
        }
        let first = self.next_actor(&state, None).expect("at least two players remain");
        self.act(state, first)
    }

    fn active(&self, state: &LeducState) -> usize {
        state.folded.iter().filter(|f| !**f).count()
    }

    /// Next non-folded seat after `after` (or from seat 0) that still has to act.
    fn next_actor(&self, state: &LeducState, after: Option<usize>) -> Option<usize> {
        let n = self.spec.players;
        let start = after.map_or(0, |p| p + 1);
        (0..n)
            .map(|k| (start + k) % n)
            .find(|&p| !state.folded[p] && (!state.acted[p] || state.round_contrib[p] < state.round_bet))
    }

    fn act(&self, state: LeducState, player: usize) -> TreeSpec {
        let facing = state.round_contrib[player] < state.round_bet;
        let can_bet = state.bets < self.spec.max_bets_per_round;
        let mut labels: Vec<char> = Vec::new();
        if facing {
            labels.push('f');
        }
        labels.push('c');
        if can_bet {
            labels.push(if facing { 'r' } else { 'b' });
        }
        let key = format!(
            "{}|{}|{}",
            state.cards[player],
            state.public.map_or("-".to_string(), |r| r.to_string()),
            state.history
        );
        let actions = labels
            .into_iter()
            .map(|label| {
                let mut next = state.clone();
                next.history.push(label);
                next.acted[player] = true;
                match label {
                    'f' => next.folded[player] = true,
                    'c' => {
                        let owed = next.round_bet - next.round_contrib[player];
                        next.round_contrib[player] += owed;
                        next.contributed[player] += owed;
                    }
                    _ => {
                        let size = self.spec.bet_sizes[next.round];
                        next.round_bet += size;
                        let owed = next.round_bet - next.round_contrib[player];
                        next.round_contrib[player] += owed;
                        next.contributed[player] += owed;
                        next.bets += 1;
                        for (p, a) in next.acted.iter_mut().enumerate() {
                            if p != player {
                                *a = false;
                            }
                        }
                    }
                }
                (label.to_string(), self.advance(next, player))
            })
            .collect();
        TreeSpec::Decision {
            player,
            infostate: key,
            actions,
        }
    }

    fn advance(&self, mut state: LeducState, last: usize) -> TreeSpec {
        if self.active(&state) == 1 {
            return TreeSpec::terminal(self.payout(&state));
        }
        if let Some(p) = self.next_actor(&state, Some(last)) {
            return self.act(state, p);
        }
        if state.round == 1 {
            return TreeSpec::terminal(self.payout(&state));
        }
        state.round = 1;
        state.round_bet = 0.0;
        state.round_contrib.iter_mut().for_each(|c| *c = 0.0);
        state.acted.iter_mut().for_each(|a| *a = false);
        state.bets = 0;
        state.history.push('/');
        self.deal(state)
    }

    fn payout(&self, state: &LeducState) -> Vec<f64> {
        let n = self.spec.players;
        let pot: f64 = state.contributed.iter().sum();
        let contenders: Vec<usize> = (0..n).filter(|&p| !state.folded[p]).collect();
        let mut receipts = vec![0.0; n];
        if contenders.len() == 1 {
            receipts[contenders[0]] = pot;
        } else {
            let public = state.public.expect("showdown after the public card");
            let paired: Vec<usize> = contenders
                .iter()
                .copied()
                .filter(|&p| state.cards[p] == public)
                .collect();
            let winners = if paired.len() == 1 {
                paired
            } else {
                let best = contenders.iter().map(|&p| state.cards[p]).max().unwrap();
                contenders
                    .iter()
                    .copied()
                    .filter(|&p| state.cards[p] == best)
                    .collect()
            };
            if winners.len() == 1 {
                receipts[winners[0]] = pot;
            } else {
                let share = self.spec.beta * pot / winners.len() as f64;
                for &w in &winners {
                    receipts[w] = share;
                }
            }
        }
        (0..n).map(|p| receipts[p] - state.contributed[p]).collect()
    }
}

/// Leduc poker with `n` players and the beta-discounted tie rule.
///
/// Cards are dealt by rank (suits never matter), so chance outcomes carry the
/// multiplicity of the remaining cards of each rank.
pub fn make_leduc(spec: LeducSpec) -> Result<GameTree, GameError> {
    spec.validate()?;
    let n = spec.players;
    let state = LeducState {
        cards: Vec::new(),
        public: None,
        counts: vec![2; spec.ranks()],
        round: 0,
        contributed: vec![spec.ante; n],
        folded: vec![false; n],
        round_bet: 0.0,
        round_contrib: vec![0.0; n],
        acted: vec![false; n],
        bets: 0,
        history: String::new(),
    };
    let root = LeducBuilder { spec }.deal(state);
    GameTree::new(n, root)
}

/// Exhaustive normal form of a small tree.
#[derive(Debug, Clone)]
pub struct NormalFormView {
    /// Pure-strategy count per player.
    pub dims: Vec<usize>,
    /// Infostates of each player, in the order pure strategies index them.
    pub player_infostates: Vec<Vec<usize>>,
    /// `[player][pure strategy]` -> action index per entry of `player_infostates`.
    pub strategies: Vec<Vec<Vec<usize>>>,
    /// `profile * players + player`, chance marginalized by expectation.
    pub utilities: Vec<f64>,
    /// For each terminal, the first joint pure profile that plays to it.
    pub terminal_profile: Vec<usize>,
}

impl NormalFormView {
    pub fn players(&self) -> usize {
        self.dims.len()
    }

    pub fn num_profiles(&self) -> usize {
        self.dims.iter().product()
    }

    /// Mixed-radix index, player 0 most significant.
    pub fn profile_index(&self, pure: &[usize]) -> usize {
        pure.iter().zip(&self.dims).fold(0, |acc, (&p, &d)| acc * d + p)
    }

    pub fn profile_components(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for i in (0..self.dims.len()).rev() {
            out[i] = index % self.dims[i];
            index /= self.dims[i];
        }
        out
    }

    pub fn utility(&self, profile: usize, player: usize) -> f64 {
        self.utilities[profile * self.players() + player]
    }

    /// Probability a behavior strategy assigns to each of the player's pure
    /// strategies (the product over infostates).
    pub fn mixed_strategy(&self, game: &GameTree, profile: &StrategyProfile, player: usize) -> Vec<f64> {
        self.strategies[player]
            .iter()
            .map(|choice| {
                self.player_infostates[player]
                    .iter()
                    .zip(choice)
                    .map(|(&s, &a)| profile.get(game, s)[a])
                    .product()
            })
            .collect()
    }

    /// Product distribution over joint pure profiles from per-player mixed strategies.
    pub fn product_joint(&self, mixed: &[Vec<f64>]) -> Vec<f64> {
        (0..self.num_profiles())
            .map(|k| {
                self.profile_components(k)
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| mixed[i][p])
                    .product()
            })
            .collect()
    }

    /// Expected utilities under a joint distribution over pure profiles.
    pub fn evaluate(&self, joint: &[f64]) -> Vec<f64> {
        let n = self.players();
        let mut u = vec![0.0; n];
        for (k, &p) in joint.iter().enumerate() {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += p * self.utility(k, i);
            }
        }
        u
    }
}

/// Converts a small tree to normal form by enumerating every joint pure profile.
pub fn to_normal_form(game: &GameTree, cap: usize) -> Result<NormalFormView, GameError> {
    let n = game.players();
    let player_infostates: Vec<Vec<usize>> = (0..n).map(|i| game.player_infostates(i).collect()).collect();
    let counts: Vec<f64> = player_infostates
        .iter()
        .map(|ss| ss.iter().map(|&s| game.infostate(s).num_actions() as f64).product())
        .collect();
    let required: f64 = counts.iter().product();
    if !(required <= cap as f64) {
        return Err(GameError::TooLarge { required, cap, counts });
    }
    let dims: Vec<usize> = counts.iter().map(|&c| c as usize).collect();
    let strategies: Vec<Vec<Vec<usize>>> = player_infostates
        .iter()
        .zip(&dims)
        .map(|(ss, &count)| {
            (0..count)
                .map(|mut k| {
                    let mut choice = vec![0; ss.len()];
                    for (j, &s) in ss.iter().enumerate().rev() {
                        let m = game.infostate(s).num_actions();
                        choice[j] = k % m;
                        k /= m;
                    }
                    choice
                })
                .collect()
        })
        .collect();

    let mut view = NormalFormView {
        dims,
        player_infostates,
        strategies,
        utilities: Vec::new(),
        terminal_profile: vec![usize::MAX; game.num_terminals()],
    };
    let total = view.num_profiles();
    let mut utilities = vec![0.0; total * n];
    for k in 0..total {
        let pure = view.profile_components(k);
        let mut probs = vec![0.0; game.num_slots()];
        for i in 0..n {
            for (j, &s) in view.player_infostates[i].iter().enumerate() {
                probs[game.infostate(s).offset + view.strategies[i][pure[i]][j]] = 1.0;
            }
        }
        let contrib = game.contributions(&probs);
        for z in 0..game.num_terminals() {
            let own: f64 = contrib.iter().map(|d| d[z]).product();
            if own == 0.0 {
                continue;
            }
            if view.terminal_profile[z] == usize::MAX {
                view.terminal_profile[z] = k;
            }
            let w = game.terminal_chance()[z] * own;
            for i in 0..n {
                utilities[k * n + i] += w * game.utility(z, i);
            }
        }
    }
    view.utilities = utilities;
    Ok(view)
}
