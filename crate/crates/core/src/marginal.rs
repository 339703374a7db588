//! Marginalizability metrics: the product-of-contributions distribution over
//! terminals, its KL gap to the realized terminal distribution, normal-form
//! total correlation and the Nash-gap certificate built from them.

use serde::Serialize;

use crate::efg::{self, GameTree, StrategyProfile, TerminalDistribution};
use crate::error::MetricError;
use crate::games::{self, NormalFormView};
use crate::trace::RunTrace;

const DEGENERATE_FLOOR: f64 = 1e-300;

/// `mu(z) = d_c(z) prod_i avg_t d_i(sigma^t)(z)`.
pub fn marginal_across_terminals(trace: &RunTrace) -> Result<TerminalDistribution, MetricError> {
    if trace.steps() == 0 {
        return Err(MetricError::EmptyTrace);
    }
    let (_, contributions) = trace.sums();
    let w = trace.weight_sum();
    let mu = trace
        .chance()
        .iter()
        .enumerate()
        .map(|(z, c)| c * contributions.iter().map(|d| d[z] / w).product::<f64>())
        .collect();
    Ok(TerminalDistribution(mu))
}

/// `KL(p || q)` in nats with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    if p.len() != q.len() {
        return Err(MetricError::Size(format!("{} vs {} entries", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (z, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a <= 0.0 {
            continue;
        }
        if b < DEGENERATE_FLOOR {
            return Err(MetricError::Degenerate { terminal: z, d: a, mu: b });
        }
        total += a * (a / b).ln();
    }
    // Rounding can push an exact zero slightly negative.
    Ok(total.max(0.0))
}

/// Extensive-form marginalizability `KL(d(psi) || mu(psi))` of a trace.
pub fn efm(trace: &RunTrace) -> Result<f64, MetricError> {
    let mu = marginal_across_terminals(trace)?;
    kl_divergence(&trace.avg_reach().0, &mu.0)
}

/// Mean of the prefix EFM values `efm(psi^1), ..., efm(psi^T)`.
pub fn meta_loss(prefix_efm: &[f64]) -> Result<f64, MetricError> {
    if prefix_efm.is_empty() {
        return Err(MetricError::EmptyTrace);
    }
    Ok(prefix_efm.iter().sum::<f64>() / prefix_efm.len() as f64)
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&v| v > 0.0).map(|v| -v * v.ln()).sum()
}

/// Total correlation of a joint distribution over a product space with the
/// given per-player sizes; index layout has player 0 most significant.
pub fn total_correlation_joint(dims: &[usize], joint: &[f64]) -> Result<f64, MetricError> {
    let size: usize = dims.iter().product();
    if size != joint.len() {
        return Err(MetricError::Size(format!(
            "joint has {} entries, dimensions {:?} need {}",
            joint.len(),
            dims,
            size
        )));
    }
    let mass: f64 = joint.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(MetricError::Size(format!("joint sums to {mass}")));
    }
    let marginals = joint_marginals(dims, joint);
    let tc = marginals.iter().map(|m| entropy(m.iter().copied())).sum::<f64>()
        - entropy(joint.iter().copied());
    Ok(tc.max(0.0))
}

/// Per-player marginals of a joint laid out as in [`total_correlation_joint`].
pub fn joint_marginals(dims: &[usize], joint: &[f64]) -> Vec<Vec<f64>> {
    let mut marginals: Vec<Vec<f64>> = dims.iter().map(|&k| vec![0.0; k]).collect();
    for (idx, &p) in joint.iter().enumerate() {
        let mut rest = idx;
        for i in (0..dims.len()).rev() {
            marginals[i][rest % dims[i]] += p;
            rest /= dims[i];
        }
    }
    marginals
}

/// Total correlation of a joint distribution over the pure profiles of `view`.
pub fn total_correlation(view: &NormalFormView, joint: &[f64]) -> Result<f64, MetricError> {
    total_correlation_joint(&view.dims, joint)
}

/// Components of the Nash-gap certificate of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub nash_gap: f64,
    pub cce_gap: f64,
    pub efm: f64,
    pub max_utility: f64,
    pub rhs: f64,
    pub slack: f64,
}

pub const CERTIFICATE_TOLERANCE: f64 = 1e-6;

/// Checks `nash_gap(avg) <= cce_gap + 2 M sqrt(2 efm)` on the trace's average
/// strategy.
pub fn certify_bound(game: &GameTree, trace: &RunTrace) -> Result<BoundCertificate, MetricError> {
    let average = trace.average_strategy(game);
    let nash_gap = efg::nash_gap(game, &average)?;
    let cce_gap = efg::cce_gap(game, trace)?;
    let eps = efm(trace)?;
    let max_utility = game.max_abs_utility();
    let rhs = cce_gap + 2.0 * max_utility * (2.0 * eps).sqrt();
    let cert = BoundCertificate {
        nash_gap,
        cce_gap,
        efm: eps,
        max_utility,
        rhs,
        slack: rhs - nash_gap,
    };
    if cert.slack < -CERTIFICATE_TOLERANCE {
        return Err(MetricError::Certificate {
            nash_gap,
            cce_gap,
            efm: eps,
            max_utility,
            slack: cert.slack,
        });
    }
    Ok(cert)
}

/// EFM of the uniformly weighted sequence `steps` and the total correlation of
/// the empirical joint over pure profiles obtained by mapping each behavior
/// profile to its equivalent product of mixed strategies. Chance is
/// marginalized out of the normal form.
pub fn nfm_efm_equivalence_check(
    game: &GameTree,
    steps: &[StrategyProfile],
) -> Result<(f64, f64), MetricError> {
    if steps.is_empty() {
        return Err(MetricError::EmptyTrace);
    }
    let view = games::to_normal_form(game, games::DEFAULT_NORMAL_FORM_CAP)?;
    let mut joint = vec![0.0; view.num_profiles()];
    for profile in steps {
        let mixed: Vec<Vec<f64>> = (0..game.players())
            .map(|i| view.mixed_strategy(game, profile, i))
            .collect();
        for (j, p) in joint.iter_mut().zip(view.product_joint(&mixed)) {
            *j += p / steps.len() as f64;
        }
    }
    let trace = RunTrace::from_profiles(game, steps);
    Ok((efm(&trace)?, total_correlation(&view, &joint)?))
}
