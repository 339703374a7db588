//! Counterfactual regret minimization with the neural predictor, unrolled on
//! the tape so the meta-loss can be differentiated through every step.
//!
//! All per-slot quantities are `1 x num_slots` rows. Slots are grouped by the
//! owner depth of their infostate, so each depth level is a contiguous column
//! range and the realization plan and counterfactual values can be built one
//! level at a time with gathers and scatters.

use std::sync::Arc;

use crate::autodiff::check::{check_directions, GradCheck};
use crate::autodiff::{Matrix, Tape, Var, SENTINEL};
use crate::efg::GameTree;
use crate::error::TapeError;
use crate::regret::{Algorithm, Averaging, UpdateMode};

use super::network::{PredictionForm, PredictorParams, PredictorVars};

/// Tolerance for central-difference checks of a whole unroll.
pub const UNROLL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
struct Level {
    slots: (usize, usize),
    infostates: (usize, usize),
    /// Per slot of the level, index into `[1] ++ realization` of the owner's
    /// parent sequence.
    parent_xs: Arc<[usize]>,
    /// Per slot, the infostate index relative to the level.
    slot_local_infostate: Arc<[usize]>,
    /// Per infostate of the level, its parent slot relative to the previous
    /// level (`SENTINEL` at the root level).
    parent_local_slot: Arc<[usize]>,
}

/// Index structure of one game tree, shared by every game of a distribution.
#[derive(Debug, Clone)]
pub struct UnrollPlan {
    players: usize,
    num_slots: usize,
    num_infostates: usize,
    num_terminals: usize,
    max_actions: usize,
    segments: Arc<[(usize, usize)]>,
    slot_infostate: Arc<[usize]>,
    levels: Vec<Level>,
    /// Per player and terminal: last own slot, or `SENTINEL`.
    last_slot: Vec<Arc<[usize]>>,
    /// Same, shifted by one into `[1] ++ realization` (0 selects the 1).
    last_xs: Vec<Arc<[usize]>>,
    /// `num_infostates x max_actions` padded layout to slot index.
    pad: Arc<[usize]>,
    /// Slot to padded position.
    unpad: Arc<[usize]>,
    owner: Vec<usize>,
}

impl UnrollPlan {
    pub fn new(game: &GameTree) -> Self {
        let n = game.players();
        let infos = game.infostates();
        let a_max = game.max_actions();
        let segments: Arc<[(usize, usize)]> = infos.iter().map(|i| (i.offset, i.num_actions())).collect();
        let slot_infostate: Arc<[usize]> = (0..game.num_slots()).map(|q| game.slot_infostate(q)).collect();

        let mut levels: Vec<Level> = Vec::new();
        let mut start = 0;
        while start < infos.len() {
            let depth = infos[start].depth;
            let end = (start..infos.len()).find(|&s| infos[s].depth != depth).unwrap_or(infos.len());
            let lo = infos[start].offset;
            let hi = infos[end - 1].offset + infos[end - 1].num_actions();
            let prev_lo = levels.last().map_or(0, |l| l.slots.0);
            let mut parent_xs = Vec::with_capacity(hi - lo);
            let mut local = Vec::with_capacity(hi - lo);
            let mut parent_local = Vec::with_capacity(end - start);
            for (k, info) in infos[start..end].iter().enumerate() {
                let p = info.parent_slot.map_or(0, |p| p + 1);
                parent_local.push(info.parent_slot.map_or(SENTINEL, |p| p - prev_lo));
                for _ in info.slots() {
                    parent_xs.push(p);
                    local.push(k);
                }
            }
            levels.push(Level {
                slots: (lo, hi),
                infostates: (start, end),
                parent_xs: parent_xs.into(),
                slot_local_infostate: local.into(),
                parent_local_slot: parent_local.into(),
            });
            start = end;
        }

        let last_slot: Vec<Arc<[usize]>> = (0..n)
            .map(|i| {
                (0..game.num_terminals())
                    .map(|z| game.last_slot(z, i).unwrap_or(SENTINEL))
                    .collect()
            })
            .collect();
        let last_xs = last_slot
            .iter()
            .map(|l| l.iter().map(|&q| if q == SENTINEL { 0 } else { q + 1 }).collect())
            .collect();
        let mut pad = vec![SENTINEL; infos.len() * a_max];
        let mut unpad = vec![0; game.num_slots()];
        for (s, info) in infos.iter().enumerate() {
            for (a, q) in info.slots().enumerate() {
                pad[s * a_max + a] = q;
                unpad[q] = s * a_max + a;
            }
        }
        UnrollPlan {
            players: n,
            num_slots: game.num_slots(),
            num_infostates: infos.len(),
            num_terminals: game.num_terminals(),
            max_actions: a_max,
            segments,
            slot_infostate,
            levels,
            last_slot,
            last_xs,
            pad: pad.into(),
            unpad: unpad.into(),
            owner: infos.iter().map(|i| i.player).collect(),
        }
    }

    /// `true` when `game` has exactly this plan's structure.
    pub fn matches(&self, game: &GameTree) -> bool {
        game.players() == self.players
            && game.num_slots() == self.num_slots
            && game.num_terminals() == self.num_terminals
            && game.num_infostates() == self.num_infostates
            && game
                .infostates()
                .iter()
                .zip(self.segments.iter())
                .all(|(i, &(o, k))| i.offset == o && i.num_actions() == k)
            && (0..self.players).all(|i| {
                (0..self.num_terminals).all(|z| game.last_slot(z, i).unwrap_or(SENTINEL) == self.last_slot[i][z])
            })
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    fn slot_mask(&self, player: usize) -> Matrix {
        let data = self.slot_infostate.iter().map(|&s| f64::from(u8::from(self.owner[s] == player))).collect();
        Matrix::row_vector(data)
    }

    fn row_mask(&self, player: usize, width: usize) -> Matrix {
        let mut m = Matrix::zeros(self.num_infostates, width);
        for (s, &o) in self.owner.iter().enumerate() {
            if o == player {
                m.data[s * width..(s + 1) * width].fill(1.0);
            }
        }
        m
    }
}

/// Solver settings for an unroll.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnrollConfig {
    pub horizon: usize,
    pub algorithm: Algorithm,
    pub update: UpdateMode,
    pub averaging: Averaging,
}

impl UnrollConfig {
    /// Defaults of `algorithm` (which must be neural).
    pub fn new(algorithm: Algorithm, horizon: usize) -> Self {
        UnrollConfig {
            horizon,
            algorithm,
            update: algorithm.default_update_mode(),
            averaging: algorithm.default_averaging(Default::default()),
        }
    }
}

/// Result of an unroll.
pub struct UnrollOutput {
    /// Mean of the prefix-averaged EFM over the horizon.
    pub loss: Var,
    pub prefix_efm: Vec<f64>,
    /// Current strategy `sigma^t` per step, `1 x num_slots`.
    pub strategies: Vec<Var>,
}

/// `m * new + (1 - m) * old` for a 0/1 constant mask.
fn blend(tape: &mut Tape, mask: Var, inverse: Var, new: Var, old: Var) -> Result<Var, TapeError> {
    let a = tape.mul(mask, new)?;
    let b = tape.mul(inverse, old)?;
    tape.add(a, b)
}

fn product(tape: &mut Tape, parts: &[Var]) -> Result<Var, TapeError> {
    let mut acc = parts[0];
    for &p in &parts[1..] {
        acc = tape.mul(acc, p)?;
    }
    Ok(acc)
}

/// Unrolls `horizon` steps of neural predictive CFR on `game` and records the
/// meta-loss on `tape`.
pub fn unroll(
    tape: &mut Tape,
    plan: &UnrollPlan,
    game: &GameTree,
    params: &PredictorParams,
    vars: &PredictorVars,
    cfg: &UnrollConfig,
) -> Result<UnrollOutput, TapeError> {
    let n = plan.players;
    let ns = plan.num_slots;
    let nz = plan.num_terminals;
    let s_count = plan.num_infostates;
    let a_max = plan.max_actions;
    let arch = params.architecture;
    let hd = arch.hidden;
    if cfg.horizon == 0 {
        return Err(TapeError::Shape { op: "unroll", detail: "horizon must be at least 1".into() });
    }
    if !plan.matches(game) || arch.max_actions != a_max || arch.num_infostates != s_count {
        return Err(TapeError::Shape {
            op: "unroll",
            detail: "game structure does not match the plan or predictor".into(),
        });
    }

    let chance = tape.constant(Matrix::row_vector(game.terminal_chance().to_vec()));
    let utilities: Vec<Var> = (0..n)
        .map(|i| tape.constant(Matrix::row_vector((0..nz).map(|z| game.utility(z, i)).collect())))
        .collect();
    let one = tape.constant(Matrix::scalar(1.0));
    let masks: Option<Vec<[Var; 4]>> = match cfg.update {
        UpdateMode::Simultaneous => None,
        UpdateMode::Alternating => Some(
            (0..n)
                .map(|i| {
                    let m = plan.slot_mask(i);
                    let r = plan.row_mask(i, hd);
                    let (mi, ri) = (m.map(|v| 1.0 - v), r.map(|v| 1.0 - v));
                    [tape.constant(m), tape.constant(mi), tape.constant(r), tape.constant(ri)]
                })
                .collect(),
        ),
    };

    let mut cumulative = tape.constant(Matrix::zeros(1, ns));
    let mut prediction = tape.constant(Matrix::zeros(1, ns));
    let mut state: Vec<(Var, Var)> = (0..arch.layers)
        .map(|_| {
            let h = tape.constant(Matrix::zeros(s_count, hd));
            let c = tape.constant(Matrix::zeros(s_count, hd));
            (h, c)
        })
        .collect();
    let mut reach_sum = tape.constant(Matrix::zeros(1, nz));
    let mut contrib_sum: Vec<Var> = (0..n).map(|_| tape.constant(Matrix::zeros(1, nz))).collect();
    let mut weight_sum = 0.0;
    let mut efm_total: Option<Var> = None;
    let mut prefix_efm = Vec::with_capacity(cfg.horizon);
    let mut strategies = Vec::with_capacity(cfg.horizon);

    for t in 1..=cfg.horizon {
        // Strategy from regret matching on R + p.
        let xi = tape.add(cumulative, prediction)?;
        let pos = tape.positive_part(xi);
        let sigma = tape.normalize_segments(pos, plan.segments.clone())?;
        strategies.push(sigma);

        // Realization plan, one depth level at a time.
        let mut xs = one;
        let mut sigma_levels = Vec::with_capacity(plan.levels.len());
        for level in &plan.levels {
            let (lo, hi) = level.slots;
            let sl = tape.col_slice(sigma, lo, hi)?;
            let parent = tape.gather(xs, level.parent_xs.clone(), 1, hi - lo)?;
            let x = tape.mul(sl, parent)?;
            xs = tape.concat_cols(&[xs, x])?;
            sigma_levels.push(sl);
        }
        let d: Vec<Var> = (0..n)
            .map(|i| tape.gather(xs, plan.last_xs[i].clone(), 1, nz))
            .collect::<Result<_, _>>()?;

        // Running averages and the prefix EFM.
        let w = cfg.averaging.weight(t);
        weight_sum += w;
        let mut reach_parts = vec![chance];
        reach_parts.extend(&d);
        let reach = product(tape, &reach_parts)?;
        let wr = tape.scale(reach, w);
        reach_sum = tape.add(reach_sum, wr)?;
        for i in 0..n {
            let wd = tape.scale(d[i], w);
            contrib_sum[i] = tape.add(contrib_sum[i], wd)?;
        }
        let inv = 1.0 / weight_sum;
        let avg_reach = tape.scale(reach_sum, inv);
        let mut mu_parts = vec![chance];
        for &c in &contrib_sum {
            mu_parts.push(tape.scale(c, inv));
        }
        let mu = product(tape, &mu_parts)?;
        let log_d = tape.safe_log(avg_reach)?;
        let log_mu = tape.safe_log(mu)?;
        let diff = tape.sub(log_d, log_mu)?;
        let terms = tape.mul(avg_reach, diff)?;
        let kl = tape.sum(terms);
        let kl = tape.positive_part(kl);
        prefix_efm.push(tape.value(kl).data[0]);
        efm_total = Some(match efm_total {
            Some(acc) => tape.add(acc, kl)?,
            None => kl,
        });

        // Counterfactual values: terminal payoffs enter at each player's last
        // slot, then infostate values roll up level by level.
        let mut direct: Option<Var> = None;
        for i in 0..n {
            let mut parts = vec![chance];
            parts.extend((0..n).filter(|&j| j != i).map(|j| d[j]));
            let reach_i = product(tape, &parts)?;
            let term = tape.mul(reach_i, utilities[i])?;
            let scattered = tape.scatter_add(term, plan.last_slot[i].clone(), 1, ns)?;
            direct = Some(match direct {
                Some(acc) => tape.add(acc, scattered)?,
                None => scattered,
            });
        }
        let direct = direct.expect("at least one player");
        let mut values = vec![None; plan.levels.len()];
        let mut info_values = vec![None; plan.levels.len()];
        let mut child: Option<Var> = None;
        for (k, level) in plan.levels.iter().enumerate().rev() {
            let (lo, hi) = level.slots;
            let mut v = tape.col_slice(direct, lo, hi)?;
            if let (Some(c), Some(next)) = (child, plan.levels.get(k + 1)) {
                let up = tape.scatter_add(c, next.parent_local_slot.clone(), 1, hi - lo)?;
                v = tape.add(v, up)?;
            }
            let weighted = tape.mul(sigma_levels[k], v)?;
            let (s0, s1) = level.infostates;
            let val = tape.scatter_add(weighted, level.slot_local_infostate.clone(), 1, s1 - s0)?;
            values[k] = Some(v);
            info_values[k] = Some(val);
            child = Some(val);
        }
        let values: Vec<Var> = values.into_iter().map(|v| v.expect("level value")).collect();
        let info_values: Vec<Var> = info_values.into_iter().map(|v| v.expect("level value")).collect();
        let v = tape.concat_cols(&values)?;
        let iv = tape.concat_cols(&info_values)?;
        let baseline = tape.gather(iv, plan.slot_infostate.clone(), 1, ns)?;
        let regret = tape.sub(v, baseline)?;

        // Minimizer updates.
        let summed = tape.add(cumulative, regret)?;
        let updated = if cfg.algorithm.is_plus() { tape.positive_part(summed) } else { summed };
        let acting = masks.as_ref().map(|m| m[(t - 1) % n]);
        cumulative = match acting {
            Some([m, mi, _, _]) => blend(tape, m, mi, updated, cumulative)?,
            None => updated,
        };

        let r_pad = tape.gather(regret, plan.pad.clone(), s_count, a_max)?;
        let cum_pad = tape.gather(cumulative, plan.pad.clone(), s_count, a_max)?;
        let input = tape.concat_cols(&[r_pad, cum_pad, vars.embedding])?;
        let (pi, next_state) = vars.forward(tape, arch.activation, input, &state)?;
        let pi_flat = tape.gather(pi, plan.unpad.clone(), 1, ns)?;
        let raw = match arch.form {
            PredictionForm::Residual => tape.add(regret, pi_flat)?,
            PredictionForm::Direct => pi_flat,
        };
        let new_prediction = tape.scale(raw, arch.alpha);
        match acting {
            Some([m, mi, rm, rmi]) => {
                prediction = blend(tape, m, mi, new_prediction, prediction)?;
                state = state
                    .iter()
                    .zip(&next_state)
                    .map(|(&(h, c), &(h2, c2))| Ok((blend(tape, rm, rmi, h2, h)?, blend(tape, rm, rmi, c2, c)?)))
                    .collect::<Result<_, TapeError>>()?;
            }
            None => {
                prediction = new_prediction;
                state = next_state;
            }
        }
    }
    let total = efm_total.expect("horizon >= 1");
    let loss = tape.scale(total, 1.0 / cfg.horizon as f64);
    Ok(UnrollOutput { loss, prefix_efm, strategies })
}

/// Meta-loss and its gradient with respect to every parameter array, in
/// canonical order.
pub fn meta_gradient(
    plan: &UnrollPlan,
    game: &GameTree,
    params: &PredictorParams,
    cfg: &UnrollConfig,
) -> Result<MetaGradient, TapeError> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = unroll(&mut tape, plan, game, params, &vars, cfg)?;
    let loss = tape.value(out.loss).data[0];
    let grads = tape.backward(out.loss)?;
    let arrays = params.arrays();
    let gradients = vars
        .all()
        .into_iter()
        .zip(arrays)
        .map(|(v, m)| grads.get_or_zeros(v, m))
        .collect();
    Ok(MetaGradient {
        loss,
        gradients,
        floored_logs: tape.floored_logs(),
    })
}

/// Output of [`meta_gradient`].
#[derive(Debug, Clone)]
pub struct MetaGradient {
    pub loss: f64,
    pub gradients: Vec<Matrix>,
    pub floored_logs: usize,
}

/// Meta-loss value only (no backward pass).
pub fn meta_loss_value(
    plan: &UnrollPlan,
    game: &GameTree,
    params: &PredictorParams,
    cfg: &UnrollConfig,
) -> Result<f64, TapeError> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = unroll(&mut tape, plan, game, params, &vars, cfg)?;
    Ok(tape.value(out.loss).data[0])
}

/// Central-difference check of the unrolled meta-loss along random
/// directions in parameter space.
pub fn gradcheck_unroll(
    game: &GameTree,
    params: &PredictorParams,
    cfg: &UnrollConfig,
    directions: usize,
    seed: u64,
) -> Result<GradCheck, TapeError> {
    let plan = UnrollPlan::new(game);
    let arrays: Vec<Matrix> = params.arrays().into_iter().cloned().collect();
    let layers = params.architecture.layers;
    check_directions(
        &format!("unroll[{}x{}]", cfg.algorithm, cfg.horizon),
        &arrays,
        |tape: &mut Tape, vars: &[Var]| {
            let pv = PredictorVars::from_canonical(vars, layers);
            Ok(unroll(tape, &plan, game, params, &pv, cfg)?.loss)
        },
        directions,
        seed,
        UNROLL_TOLERANCE,
    )
}
