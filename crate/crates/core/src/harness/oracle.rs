use serde::Serialize;

use crate::autodiff::check::{primitive_suite, GradCheck};
use crate::efg::{self, StrategyProfile};
use crate::games::{analytic_nash_biased_shapley, delta_star, make_biased_shapley};
use crate::npcfr::{gradcheck_unroll, Activation, Architecture, PredictionForm, PredictorParams, UnrollConfig};
use crate::regret::Algorithm;
use crate::rng::{self, Stream};
use crate::trace::RunTrace;

use super::HarnessError;

pub const NASH_TOLERANCE: f64 = 1e-9;
pub const CCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub eta: f64,
    /// NashGap of the analytic equilibrium.
    pub nash_gap: f64,
    /// CCE gap of the six-cell cycle distribution.
    pub cce_gap: f64,
    /// `(1 + eta)/3 - 1/2`.
    pub expected_cce_gap: f64,
}

impl OracleRow {
    pub fn passed(&self) -> bool {
        self.nash_gap <= NASH_TOLERANCE && (self.cce_gap - self.expected_cce_gap).abs() <= CCE_TOLERANCE
    }
}

/// Parses `low:high:step` into `low, low + step, ...` up to `high`
/// (inclusive within rounding).
pub fn parse_eta_grid(spec: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = |why: &str| HarnessError::Config(format!("eta grid `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(bad("expected low:high:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
        return Err(bad("need finite low <= high and step > 0"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(bad("more than a million points"));
    }
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

fn cycle_trace(eta: f64) -> Result<RunTrace, HarnessError> {
    let game = make_biased_shapley(eta)?;
    let ds = delta_star();
    let mut profiles = Vec::new();
    for (r, row) in ds.iter().enumerate() {
        for (c, &w) in row.iter().enumerate() {
            if w > 0.0 {
                let mut p = StrategyProfile::empty(&game);
                let pure = |k: usize| (0..3).map(|a| if a == k { 1.0 } else { 0.0 }).collect::<Vec<_>>();
                p.set(&game, 0, &pure(r))?;
                p.set(&game, 1, &pure(c))?;
                profiles.push(p);
            }
        }
    }
    Ok(RunTrace::from_profiles(&game, &profiles))
}

/// Checks the analytic equilibrium and the cycle distribution's CCE gap at
/// every grid point.
pub fn oracle_sweep(etas: &[f64]) -> Result<Vec<OracleRow>, HarnessError> {
    etas.iter()
        .map(|&eta| {
            let game = make_biased_shapley(eta)?;
            let nash = analytic_nash_biased_shapley(eta)?;
            let trace = cycle_trace(eta)?;
            let cce_gap = efg::cce_gap(&game, &trace).map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(OracleRow {
                eta,
                nash_gap: efg::nash_gap(&game, &nash)?,
                cce_gap,
                expected_cce_gap: (1.0 + eta) / 3.0 - 0.5,
            })
        })
        .collect()
}

/// Every primitive check plus 4-step unrolled meta-loss checks on biased
/// Shapley for three predictor configurations.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheck>, HarnessError> {
    let mut checks = primitive_suite(seed)?;
    let game = make_biased_shapley(0.25)?;
    for (k, (alg, act)) in [
        (Algorithm::Npcfr, Activation::Sigmoid),
        (Algorithm::Npcfr, Activation::Tanh),
        (Algorithm::NpcfrPlus, Activation::Tanh),
    ]
    .into_iter()
    .enumerate()
    {
        let arch = Architecture {
            hidden: 6,
            embed: 3,
            ..Architecture::for_game(&game, act, PredictionForm::Residual, 2.0)
        };
        let s = seed.wrapping_add(k as u64);
        let params = PredictorParams::random(arch, &mut rng::stream(s, Stream::Init));
        checks.push(gradcheck_unroll(&game, &params, &UnrollConfig::new(alg, 4), 20, s)?);
    }
    Ok(checks)
}
