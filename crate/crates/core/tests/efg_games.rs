use std::collections::{BTreeSet, HashMap};

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regretforge::efg::{self, Node};
use regretforge::games::{self, LeducSpec};
use regretforge::{GameError, GameTree, RunTrace, StrategyProfile, TerminalDistribution, TreeSpec};

fn random_profile(game: &GameTree, rng: &mut impl Rng) -> StrategyProfile {
    let mut p = StrategyProfile::empty(game);
    for s in 0..game.num_infostates() {
        let k = game.infostate(s).num_actions();
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let t: f64 = raw.iter().sum();
        p.set(game, s, &raw.iter().map(|v| v / t).collect::<Vec<_>>()).unwrap();
    }
    p
}

fn pure_profile(game: &GameTree, rows: &[(usize, usize)]) -> StrategyProfile {
    let mut p = StrategyProfile::empty(game);
    for &(s, a) in rows {
        let mut v = vec![0.0; game.infostate(s).num_actions()];
        v[a] = 1.0;
        p.set(game, s, &v).unwrap();
    }
    p
}

fn shapley_cell(game: &GameTree, row: usize, col: usize) -> usize {
    let profile = pure_profile(game, &[(0, row), (1, col)]);
    let reach = efg::reach_decompose(game, &profile).unwrap().reach();
    reach.0.iter().position(|&p| p == 1.0).unwrap()
}

#[test]
fn chance_only_game_decomposes_to_chance() {
    let spec = TreeSpec::Chance {
        outcomes: vec![(0.3, TreeSpec::terminal(vec![1.0])), (0.7, TreeSpec::terminal(vec![0.0]))],
    };
    let game = GameTree::new(1, spec).unwrap();
    let dec = efg::reach_decompose(&game, &StrategyProfile::empty(&game)).unwrap();
    assert_eq!(dec.chance, vec![0.3, 0.7]);
    assert_eq!(dec.players, vec![vec![1.0, 1.0]]);
}

#[test]
fn construction_rejects_malformed_trees() {
    let bad_chance = TreeSpec::Chance {
        outcomes: vec![(0.3, TreeSpec::terminal(vec![0.0])), (0.6, TreeSpec::terminal(vec![0.0]))],
    };
    assert!(matches!(GameTree::new(1, bad_chance), Err(GameError::InvalidChance { .. })));
    let arity = TreeSpec::terminal(vec![1.0]);
    assert!(matches!(GameTree::new(2, arity), Err(GameError::UtilityArity { .. })));
    let inconsistent = TreeSpec::Chance {
        outcomes: vec![
            (
                0.5,
                TreeSpec::Decision {
                    player: 0,
                    infostate: "s".into(),
                    actions: vec![("a".into(), TreeSpec::terminal(vec![0.0]))],
                },
            ),
            (
                0.5,
                TreeSpec::Decision {
                    player: 0,
                    infostate: "s".into(),
                    actions: vec![("b".into(), TreeSpec::terminal(vec![0.0]))],
                },
            ),
        ],
    };
    assert!(matches!(
        GameTree::new(1, inconsistent),
        Err(GameError::InconsistentActions { .. })
    ));
    // Player 0 forgets its own first move.
    let leaf = |k: &str| TreeSpec::Decision {
        player: 0,
        infostate: k.into(),
        actions: vec![("x".into(), TreeSpec::terminal(vec![0.0])), ("y".into(), TreeSpec::terminal(vec![1.0]))],
    };
    let forgetful = TreeSpec::Decision {
        player: 0,
        infostate: "root".into(),
        actions: vec![("a".into(), leaf("later")), ("b".into(), leaf("later"))],
    };
    assert!(matches!(GameTree::new(1, forgetful), Err(GameError::ImperfectRecall { .. })));
}

#[test]
fn missing_infostate_is_reported() {
    let game = games::make_biased_shapley(0.0).unwrap();
    let mut p = StrategyProfile::empty(&game);
    p.set(&game, 0, &[1.0, 0.0, 0.0]).unwrap();
    match efg::reach_decompose(&game, &p) {
        Err(GameError::MissingInfostate { player: 1, key }) => assert_eq!(key, "col"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn shapley_matrices_and_uniform_values() {
    let game = games::make_biased_shapley(0.5).unwrap();
    let a = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let b = [[0.0, 1.0, 0.5], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
    for r in 0..3 {
        for c in 0..3 {
            let z = shapley_cell(&game, r, c);
            assert_eq!(game.terminal_utilities(z), &[a[r][c], b[r][c]]);
        }
    }
    let plain = games::make_biased_shapley(0.0).unwrap();
    let dec = efg::reach_decompose(&plain, &StrategyProfile::uniform(&plain)).unwrap();
    for z in 0..9 {
        assert_abs_diff_eq!(dec.players[0][z], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.players[1][z], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(dec.chance[z], 1.0);
    }
    let u = efg::expected_utility(&plain, &dec.reach()).unwrap();
    assert_abs_diff_eq!(u[0], 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(u[1], 1.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn expected_utility_of_delta_star_and_point_masses() {
    for eta in [0.0, 0.25, 0.5] {
        let game = games::make_biased_shapley(eta).unwrap();
        let mut dist = vec![0.0; 9];
        let ds = games::delta_star();
        for r in 0..3 {
            for c in 0..3 {
                dist[shapley_cell(&game, r, c)] = ds[r][c];
            }
        }
        let u = efg::expected_utility(&game, &TerminalDistribution(dist)).unwrap();
        assert_abs_diff_eq!(u[0], 0.5, epsilon = 1e-12);
    }
    let game = games::make_biased_shapley(0.5).unwrap();
    for z in 0..9 {
        let u = efg::expected_utility(&game, &TerminalDistribution::point_mass(&game, z)).unwrap();
        assert_eq!(u, game.terminal_utilities(z));
    }
    assert!(matches!(
        efg::expected_utility(&game, &TerminalDistribution(vec![1.0])),
        Err(GameError::Contract(_))
    ));
}

#[test]
fn best_response_examples() {
    let game = games::make_biased_shapley(0.0).unwrap();
    let (v, _) = efg::best_response(&game, &StrategyProfile::uniform(&game), 0).unwrap();
    assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);

    let game = games::make_biased_shapley(0.5).unwrap();
    let (v, br) = efg::best_response(&game, &StrategyProfile::uniform(&game), 0).unwrap();
    assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
    assert_eq!(br.get(&game, 0), &[1.0, 0.0, 0.0]);

    let mp = games::matching_pennies();
    let p = pure_profile(&mp, &[(0, 0), (1, 0)]);
    for player in 0..2 {
        let (v, _) = efg::best_response(&mp, &p, player).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn nash_gap_examples() {
    let g0 = games::make_biased_shapley(0.0).unwrap();
    assert!(efg::nash_gap(&g0, &StrategyProfile::uniform(&g0)).unwrap().abs() <= 1e-12);
    let g = games::make_biased_shapley(0.5).unwrap();
    let mut p = StrategyProfile::empty(&g);
    p.set(&g, 0, &[0.4, 0.2, 0.4]).unwrap();
    p.set(&g, 1, &[0.2, 0.4, 0.4]).unwrap();
    assert!(efg::nash_gap(&g, &p).unwrap().abs() <= 1e-12);
    let pure = pure_profile(&g0, &[(0, 0), (1, 0)]);
    assert_abs_diff_eq!(efg::nash_gap(&g0, &pure).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn analytic_nash_sweep_and_domain() {
    for k in 0..100 {
        let eta = 0.5 * k as f64 / 99.0;
        let game = games::make_biased_shapley(eta).unwrap();
        let nash = games::analytic_nash_biased_shapley(eta).unwrap();
        assert!(efg::nash_gap(&game, &nash).unwrap() <= 1e-9, "eta {eta}");
    }
    let g = games::make_biased_shapley(-1.0).unwrap();
    let nash = games::analytic_nash_biased_shapley(-1.0).unwrap();
    assert_eq!(nash.get(&g, 0), &[0.25, 0.5, 0.25]);
    assert!(efg::nash_gap(&g, &nash).unwrap() <= 1e-9);
    assert!(matches!(
        games::analytic_nash_biased_shapley(3.0),
        Err(GameError::Domain { .. })
    ));
    let half = games::analytic_nash_biased_shapley(0.5).unwrap();
    assert_eq!(half.probs(), &[0.4, 0.2, 0.4, 0.2, 0.4, 0.4]);
}

fn delta_star_trace(game: &GameTree) -> RunTrace {
    let ds = games::delta_star();
    let cells: Vec<(usize, usize)> = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .filter(|&(r, c)| ds[r][c] > 0.0)
        .collect();
    let profiles: Vec<StrategyProfile> = cells
        .iter()
        .map(|&(r, c)| pure_profile(game, &[(0, r), (1, c)]))
        .collect();
    RunTrace::from_profiles(game, &profiles)
}

#[test]
fn cce_gap_of_delta_star() {
    for (eta, expected) in [(0.5, 0.0), (0.4, -1.0 / 30.0), (0.55, 0.55 / 3.0 + 1.0 / 3.0 - 0.5)] {
        let game = games::make_biased_shapley(eta).unwrap();
        let gap = efg::cce_gap(&game, &delta_star_trace(&game)).unwrap();
        assert_abs_diff_eq!(gap, expected, epsilon = 1e-12);
    }
    let s = games::delta_star();
    let total: f64 = s.iter().flatten().sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
    for k in 0..3 {
        assert_abs_diff_eq!(s[k].iter().sum::<f64>(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!((0..3).map(|r| s[r][k]).sum::<f64>(), 1.0 / 3.0, epsilon = 1e-15);
    }
}

#[test]
fn single_step_cce_gap_matches_nash_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let leduc = games::make_leduc(LeducSpec::new(2, 0.7)).unwrap();
    for game in [games::make_biased_shapley(0.3).unwrap(), leduc] {
        for _ in 0..5 {
            let p = random_profile(&game, &mut rng);
            let trace = RunTrace::from_profiles(&game, std::slice::from_ref(&p));
            let cce = efg::cce_gap(&game, &trace).unwrap();
            assert_abs_diff_eq!(cce, efg::nash_gap(&game, &p).unwrap(), epsilon = 1e-9);
        }
    }
    let game = games::make_biased_shapley(0.5).unwrap();
    let nash = games::analytic_nash_biased_shapley(0.5).unwrap();
    let trace = RunTrace::from_profiles(&game, &[nash]);
    assert!(efg::cce_gap(&game, &trace).unwrap().abs() <= 1e-12);
    assert!(efg::cce_gap(&game, &RunTrace::new(&game, false)).is_err());
}

/// Second, recursive traversal computing per-player path products.
fn path_walk(game: &GameTree, profile: &StrategyProfile) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = game.players();
    let mut chance = vec![f64::NAN; game.num_terminals()];
    let mut players = vec![vec![f64::NAN; game.num_terminals()]; n];
    fn walk(
        game: &GameTree,
        profile: &StrategyProfile,
        node: usize,
        c: f64,
        d: &mut Vec<f64>,
        chance: &mut [f64],
        players: &mut [Vec<f64>],
    ) {
        match &game.nodes()[node] {
            Node::Terminal { terminal } => {
                chance[*terminal] = c;
                for (i, v) in d.iter().enumerate() {
                    players[i][*terminal] = *v;
                }
            }
            Node::Chance { outcomes } => {
                for &(p, child) in outcomes {
                    walk(game, profile, child, c * p, d, chance, players);
                }
            }
            Node::Decision { player, infostate, children } => {
                let probs = profile.get(game, *infostate).to_vec();
                for (a, &child) in children.iter().enumerate() {
                    let saved = d[*player];
                    d[*player] *= probs[a];
                    walk(game, profile, child, c, d, chance, players);
                    d[*player] = saved;
                }
            }
        }
    }
    walk(game, profile, game.root(), 1.0, &mut vec![1.0; n], &mut chance, &mut players);
    (chance, players)
}

#[test]
fn leduc_reach_matches_path_walk() {
    let game = games::make_leduc(LeducSpec::new(2, 1.0)).unwrap();
    let mut check_call = StrategyProfile::empty(&game);
    for s in 0..game.num_infostates() {
        let info = game.infostate(s);
        let v: Vec<f64> = info.actions.iter().map(|a| if a == "c" { 1.0 } else { 0.0 }).collect();
        check_call.set(&game, s, &v).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for profile in [check_call, random_profile(&game, &mut rng)] {
        let dec = efg::reach_decompose(&game, &profile).unwrap();
        let (chance, players) = path_walk(&game, &profile);
        for z in 0..game.num_terminals() {
            assert_abs_diff_eq!(dec.chance[z], chance[z], epsilon = 1e-15);
            for i in 0..2 {
                assert_abs_diff_eq!(dec.players[i][z], players[i][z], epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(dec.reach().total(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn leduc_deck_and_payoffs() {
    let spec = LeducSpec::new(2, 1.0);
    assert_eq!((spec.deck_size(), spec.ranks()), (6, 3));
    assert!(games::make_leduc(LeducSpec::new(4, 1.0)).is_err());
    assert!(games::make_leduc(LeducSpec::new(2, 1.5)).is_err());

    // Check-check in both rounds: cards as ranks 2 vs 1 with public 0.
    let game = games::make_leduc(spec).unwrap();
    let (z, _) = find_terminal(&game, &[2, 1], 0, "cc/cc");
    assert_eq!(game.terminal_utilities(z), &[1.0, -1.0]);

    let tie = games::make_leduc(LeducSpec::new(2, 0.5)).unwrap();
    let (z, _) = find_terminal(&tie, &[1, 1], 0, "cc/cc");
    assert_eq!(tie.terminal_utilities(z), &[-0.5, -0.5]);
}

/// Follows deals and actions by label to a terminal of a Leduc tree.
fn find_terminal(game: &GameTree, cards: &[usize], public: usize, history: &str) -> (usize, f64) {
    let mut node = game.root();
    let mut counts = vec![2usize; cards.len() + 1];
    let mut dealt = cards.iter().copied().chain(std::iter::once(public));
    let mut moves = history.chars().filter(|c| *c != '/');
    let mut chance = 1.0;
    loop {
        match &game.nodes()[node] {
            Node::Terminal { terminal } => return (*terminal, chance),
            Node::Chance { outcomes } => {
                // Outcomes list the still-available ranks in ascending order.
                let rank = dealt.next().unwrap();
                let idx = (0..rank).filter(|&r| counts[r] > 0).count();
                counts[rank] -= 1;
                chance *= outcomes[idx].0;
                node = outcomes[idx].1;
            }
            Node::Decision { infostate, children, .. } => {
                let label = moves.next().unwrap().to_string();
                let a = game.infostate(*infostate).actions.iter().position(|x| *x == label).unwrap();
                node = children[a];
            }
        }
    }
}

#[test]
fn leduc_money_conservation() {
    for (n, beta) in [(2, 1.0), (2, 0.3), (3, 1.0), (3, 0.5)] {
        let game = games::make_leduc(LeducSpec::new(n, beta)).unwrap();
        let mut ties = 0;
        for z in 0..game.num_terminals() {
            let s: f64 = game.terminal_utilities(z).iter().sum();
            if beta == 1.0 {
                assert!(s.abs() <= 1e-12);
            } else {
                assert!(s <= 1e-12);
                if s < -1e-12 {
                    ties += 1;
                }
            }
        }
        if beta < 1.0 {
            assert!(ties > 0);
        }
    }
}

/// Independent Leduc enumeration: pending-set formulation of the betting
/// rounds, producing infostate keys per player and the terminal count.
struct Census {
    players: usize,
    infostates: Vec<BTreeSet<String>>,
    terminals: usize,
}

impl Census {
    fn deals(&mut self, counts: &mut Vec<usize>, cards: &mut Vec<usize>) {
        if cards.len() == self.players {
            let all: Vec<usize> = (0..self.players).collect();
            self.round(cards, None, &mut counts.clone(), &vec![false; self.players], all, 0, 0, String::new());
            return;
        }
        for r in 0..counts.len() {
            if counts[r] > 0 {
                counts[r] -= 1;
                cards.push(r);
                self.deals(counts, cards);
                cards.pop();
                counts[r] += 1;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn round(
        &mut self,
        cards: &[usize],
        public: Option<usize>,
        counts: &mut Vec<usize>,
        folded: &[bool],
        pending: Vec<usize>,
        bets: usize,
        last: usize,
        history: String,
    ) {
        let alive = folded.iter().filter(|f| !**f).count();
        if alive == 1 {
            self.terminals += 1;
            return;
        }
        if pending.is_empty() {
            if public.is_some() {
                self.terminals += 1;
                return;
            }
            for r in 0..counts.len() {
                if counts[r] > 0 {
                    counts[r] -= 1;
                    let order: Vec<usize> = (0..self.players).filter(|&p| !folded[p]).collect();
                    self.round(cards, Some(r), counts, folded, order, 0, 0, format!("{history}/"));
                    counts[r] += 1;
                }
            }
            return;
        }
        let n = self.players;
        let start = if history.is_empty() || history.ends_with('/') { 0 } else { (last + 1) % n };
        let actor = (0..n).map(|k| (start + k) % n).find(|p| pending.contains(p)).unwrap();
        let key = format!("{}|{}|{}", cards[actor], public.map_or("-".into(), |p| p.to_string()), history);
        self.infostates[actor].insert(key);
        // Pending players after a bet have not matched it yet.
        let facing = bets > 0;
        let rest: Vec<usize> = pending.iter().copied().filter(|&p| p != actor).collect();
        if facing {
            let mut f = folded.to_vec();
            f[actor] = true;
            self.round(cards, public, counts, &f, rest.clone(), bets, actor, format!("{history}f"));
        }
        self.round(cards, public, counts, folded, rest, bets, actor, format!("{history}c"));
        if bets < 2 {
            let others: Vec<usize> = (0..n).filter(|&p| p != actor && !folded[p]).collect();
            let label = if facing { 'r' } else { 'b' };
            self.round(cards, public, counts, folded, others, bets + 1, actor, format!("{history}{label}"));
        }
    }
}

#[test]
fn leduc_structure_matches_independent_census() {
    for n in [2, 3] {
        let game = games::make_leduc(LeducSpec::new(n, 1.0)).unwrap();
        let mut census = Census {
            players: n,
            infostates: vec![BTreeSet::new(); n],
            terminals: 0,
        };
        census.deals(&mut vec![2; n + 1], &mut Vec::new());
        assert_eq!(game.num_terminals(), census.terminals, "{n} players");
        for i in 0..n {
            let keys: BTreeSet<String> = game
                .player_infostates(i)
                .map(|s| game.infostate(s).key.clone())
                .collect();
            assert_eq!(keys, census.infostates[i], "player {i} of {n}");
        }
    }
}

#[test]
fn normal_form_matches_tree() {
    let toy = games::card_toy_game(|card, a1, a2| {
        let v = [1.0, -2.0, 0.5, 3.0][a1 * 2 + a2] * if card == 0 { 1.0 } else { -0.5 };
        [v, 0.25 - v]
    });
    let shapley = games::make_biased_shapley(0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (game, dims) in [(toy, vec![4, 4]), (shapley, vec![3, 3])] {
        let view = games::to_normal_form(&game, games::DEFAULT_NORMAL_FORM_CAP).unwrap();
        assert_eq!(view.dims, dims);
        for k in 0..view.num_profiles() {
            let pure = view.profile_components(k);
            let mut rows = Vec::new();
            for i in 0..2 {
                for (j, &s) in view.player_infostates[i].iter().enumerate() {
                    rows.push((s, view.strategies[i][pure[i]][j]));
                }
            }
            let p = pure_profile(&game, &rows);
            let tree = efg::expected_utility(&game, &efg::reach_decompose(&game, &p).unwrap().reach()).unwrap();
            for i in 0..2 {
                assert_abs_diff_eq!(tree[i], view.utility(k, i), epsilon = 1e-12);
            }
        }
        for _ in 0..20 {
            let p = random_profile(&game, &mut rng);
            let mixed: Vec<Vec<f64>> = (0..2).map(|i| view.mixed_strategy(&game, &p, i)).collect();
            let nf = view.evaluate(&view.product_joint(&mixed));
            let tree = efg::expected_utility(&game, &efg::reach_decompose(&game, &p).unwrap().reach()).unwrap();
            for i in 0..2 {
                assert_abs_diff_eq!(tree[i], nf[i], epsilon = 1e-9);
            }
        }
    }
    let shapley = games::make_biased_shapley(0.5).unwrap();
    let view = games::to_normal_form(&shapley, 100).unwrap();
    let a = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for r in 0..3 {
        for c in 0..3 {
            assert_eq!(view.utility(view.profile_index(&[r, c]), 0), a[r][c]);
        }
    }
}

#[test]
fn leduc_normal_form_exceeds_cap() {
    let game = games::make_leduc(LeducSpec::new(2, 1.0)).unwrap();
    match games::to_normal_form(&game, games::DEFAULT_NORMAL_FORM_CAP) {
        Err(GameError::TooLarge { counts, cap, .. }) => {
            assert_eq!(cap, games::DEFAULT_NORMAL_FORM_CAP);
            assert_eq!(counts.len(), 2);
        }
        other => panic!("expected size error, got {:?}", other.map(|v| v.dims)),
    }
}

fn random_tree(rng: &mut impl Rng, players: usize, depth: usize, counter: &mut usize, keys: &mut HashMap<usize, usize>) -> TreeSpec {
    if depth == 0 || rng.random_bool(0.2) {
        return TreeSpec::terminal((0..players).map(|_| rng.random_range(-2.0..2.0)).collect());
    }
    if rng.random_bool(0.3) {
        let k = rng.random_range(1..4);
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.1).collect();
        let t: f64 = raw.iter().sum();
        let mut probs: Vec<f64> = raw.iter().map(|v| v / t).collect();
        let head: f64 = probs[..k - 1].iter().sum();
        probs[k - 1] = 1.0 - head;
        return TreeSpec::Chance {
            outcomes: probs
                .into_iter()
                .map(|p| (p, random_tree(rng, players, depth - 1, counter, keys)))
                .collect(),
        };
    }
    // Fresh infostate per node keeps perfect recall trivially.
    let player = rng.random_range(0..players);
    *counter += 1;
    keys.insert(*counter, player);
    let k = rng.random_range(1..4);
    TreeSpec::Decision {
        player,
        infostate: format!("s{counter}"),
        actions: (0..k)
            .map(|a| (format!("a{a}"), random_tree(rng, players, depth - 1, counter, keys)))
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recomposition_sums_to_one(seed in any::<u64>(), players in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_tree(&mut rng, players, 5, &mut 0, &mut HashMap::new());
        let game = GameTree::new(players, spec).unwrap();
        let p = random_profile(&game, &mut rng);
        let dec = efg::reach_decompose(&game, &p).unwrap();
        prop_assert!((dec.reach().total() - 1.0).abs() <= 1e-9);
        let (chance, contrib) = path_walk(&game, &p);
        for z in 0..game.num_terminals() {
            prop_assert!((chance[z] - dec.chance[z]).abs() <= 1e-12);
            for i in 0..players {
                prop_assert!((contrib[i][z] - dec.players[i][z]).abs() <= 1e-12);
            }
        }
        prop_assert!(efg::nash_gap(&game, &p).unwrap() >= -1e-9);
    }

    #[test]
    fn best_response_dominates_random_responses(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_tree(&mut rng, 2, 5, &mut 0, &mut HashMap::new());
        let game = GameTree::new(2, spec).unwrap();
        let p = random_profile(&game, &mut rng);
        for responder in 0..2 {
            let (value, br) = efg::best_response(&game, &p, responder).unwrap();
            let u = efg::expected_utility(&game, &efg::reach_decompose(&game, &br).unwrap().reach()).unwrap();
            prop_assert!((u[responder] - value).abs() <= 1e-9);
            for _ in 0..50 {
                let mut q = p.clone();
                let r = random_profile(&game, &mut rng);
                for s in game.player_infostates(responder) {
                    q.set(&game, s, r.get(&game, s)).unwrap();
                }
                let u = efg::expected_utility(&game, &efg::reach_decompose(&game, &q).unwrap().reach()).unwrap();
                prop_assert!(u[responder] <= value + 1e-9);
            }
        }
    }
}

#[test]
fn best_response_beats_thousand_random_responders_on_leduc() {
    let game = games::make_leduc(LeducSpec::new(2, 0.5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_profile(&game, &mut rng);
    let (value, _) = efg::best_response(&game, &p, 1).unwrap();
    for _ in 0..1000 {
        let mut q = p.clone();
        let r = random_profile(&game, &mut rng);
        for s in game.player_infostates(1) {
            q.set(&game, s, r.get(&game, s)).unwrap();
        }
        let u = efg::expected_utility(&game, &efg::reach_decompose(&game, &q).unwrap().reach()).unwrap();
        assert!(u[1] <= value + 1e-9);
    }
}
