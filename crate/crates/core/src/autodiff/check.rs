//! Central-difference gradient checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::lstm::{lstm_cell, LstmLayer, LstmVars};
use super::matrix::Matrix;
use super::tape::{Tape, Var, SENTINEL};
use crate::error::TapeError;

pub const FD_STEP: f64 = 1e-5;
pub const PRIMITIVE_TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub entries: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Builds `loss(params)` on a fresh tape.
pub trait LossFn: Fn(&mut Tape, &[Var]) -> Result<Var, TapeError> {}
impl<F: Fn(&mut Tape, &[Var]) -> Result<Var, TapeError>> LossFn for F {}

pub fn evaluate_loss(params: &[Matrix], loss: &impl LossFn) -> Result<(Tape, Vec<Var>, Var), TapeError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = loss(&mut tape, &vars)?;
    Ok((tape, vars, out))
}

/// Compares tape gradients with central differences on every entry.
pub fn check_all_entries(
    name: &str,
    params: &[Matrix],
    loss: impl LossFn,
    tolerance: f64,
) -> Result<GradCheck, TapeError> {
    let (tape, vars, out) = evaluate_loss(params, &loss)?;
    let grads = tape.backward(out)?;
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[pi], p);
        for k in 0..p.len() {
            let numeric = central_difference(params, pi, k, &loss)?;
            worst = worst.max(relative_error(analytic.data[k], numeric));
            entries += 1;
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: worst,
        tolerance,
        entries,
    })
}

/// Compares directional derivatives along random unit directions.
pub fn check_directions(
    name: &str,
    params: &[Matrix],
    loss: impl LossFn,
    directions: usize,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheck, TapeError> {
    let (tape, vars, out) = evaluate_loss(params, &loss)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Matrix> = params.iter().zip(&vars).map(|(p, v)| grads.get_or_zeros(*v, p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let dir: Vec<Matrix> = params
            .iter()
            .map(|p| random(&mut rng, p.rows, p.cols, -1.0, 1.0))
            .collect();
        let norm = dir.iter().flat_map(|d| d.data.iter()).map(|v| v * v).sum::<f64>().sqrt();
        let shifted = |sign: f64| -> Vec<Matrix> {
            params
                .iter()
                .zip(&dir)
                .map(|(p, d)| p.zip_map(d, |a, b| a + sign * FD_STEP * b / norm))
                .collect()
        };
        let (tp, _, lp) = evaluate_loss(&shifted(1.0), &loss)?;
        let (tm, _, lm) = evaluate_loss(&shifted(-1.0), &loss)?;
        let numeric = (tp.value(lp).data[0] - tm.value(lm).data[0]) / (2.0 * FD_STEP);
        let exact: f64 = analytic
            .iter()
            .zip(&dir)
            .flat_map(|(g, d)| g.data.iter().zip(&d.data))
            .map(|(g, d)| g * d / norm)
            .sum();
        worst = worst.max(relative_error(exact, numeric));
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: worst,
        tolerance,
        entries: directions,
    })
}

fn central_difference(params: &[Matrix], pi: usize, k: usize, loss: &impl LossFn) -> Result<f64, TapeError> {
    let mut plus = params.to_vec();
    plus[pi].data[k] += FD_STEP;
    let mut minus = params.to_vec();
    minus[pi].data[k] -= FD_STEP;
    let (tp, _, lp) = evaluate_loss(&plus, loss)?;
    let (tm, _, lm) = evaluate_loss(&minus, loss)?;
    Ok((tp.value(lp).data[0] - tm.value(lm).data[0]) / (2.0 * FD_STEP))
}

fn random(rng: &mut impl Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect())
}

/// Entries bounded away from zero, with random sign.
fn away_from_zero(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(
        r,
        c,
        (0..r * c)
            .map(|_| {
                let m = rng.random_range(0.1..1.5);
                if rng.random_bool(0.5) { m } else { -m }
            })
            .collect(),
    )
}

/// `sum(w * y)` for a fixed random weighting `w`, so every output entry
/// carries a distinct upstream gradient.
fn weighted(tape: &mut Tape, y: Var, seed: u64) -> Result<Var, TapeError> {
    let (r, c) = tape.shape(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random(&mut rng, r, c, -1.0, 1.0));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

/// Every primitive and a three-step LSTM unroll.
pub fn primitive_suite(seed: u64) -> Result<Vec<GradCheck>, TapeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = PRIMITIVE_TOLERANCE;
    let mut out = Vec::new();
    let a = random(&mut rng, 3, 4, -1.0, 1.0);
    let b = random(&mut rng, 3, 4, -1.0, 1.0);
    let pos = random(&mut rng, 3, 4, 0.2, 2.0);
    let kinked = away_from_zero(&mut rng, 3, 4);
    let s = seed;

    out.push(check_all_entries("add", &[a.clone(), b.clone()], |t: &mut Tape, v: &[Var]| {
        let y = t.add(v[0], v[1])?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("sub", &[a.clone(), b.clone()], |t: &mut Tape, v: &[Var]| {
        let y = t.sub(v[0], v[1])?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("mul", &[a.clone(), b.clone()], |t: &mut Tape, v: &[Var]| {
        let y = t.mul(v[0], v[1])?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("div", &[a.clone(), pos.clone()], |t: &mut Tape, v: &[Var]| {
        let y = t.div(v[0], v[1])?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("scale", std::slice::from_ref(&a), |t: &mut Tape, v: &[Var]| {
        let y = t.scale(v[0], -2.5);
        weighted(t, y, s)
    }, tol)?);
    let m = random(&mut rng, 4, 2, -1.0, 1.0);
    out.push(check_all_entries("matmul", &[a.clone(), m], |t: &mut Tape, v: &[Var]| {
        let y = t.matmul(v[0], v[1])?;
        weighted(t, y, s)
    }, tol)?);
    let bias = random(&mut rng, 1, 4, -1.0, 1.0);
    out.push(check_all_entries("add_row", &[a.clone(), bias], |t: &mut Tape, v: &[Var]| {
        let y = t.add_row(v[0], v[1])?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("col_slice_concat", &[a.clone(), b.clone()], |t: &mut Tape, v: &[Var]| {
        let l = t.col_slice(v[0], 1, 3)?;
        let y = t.concat_cols(&[l, v[1], l])?;
        weighted(t, y, s)
    }, tol)?);
    let gather_index: Arc<[usize]> = Arc::from(vec![0, 5, SENTINEL, 5, 11, 2]);
    out.push(check_all_entries("gather", std::slice::from_ref(&a), move |t: &mut Tape, v: &[Var]| {
        let y = t.gather(v[0], gather_index.clone(), 2, 3)?;
        weighted(t, y, s)
    }, tol)?);
    let scatter_index: Arc<[usize]> = Arc::from(vec![0, 1, 1, SENTINEL, 4, 0, 2, 3, 3, 3, 4, 1]);
    out.push(check_all_entries("scatter_add", std::slice::from_ref(&a), move |t: &mut Tape, v: &[Var]| {
        let y = t.scatter_add(v[0], scatter_index.clone(), 1, 5)?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("positive_part", std::slice::from_ref(&kinked), |t: &mut Tape, v: &[Var]| {
        let y = t.positive_part(v[0]);
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("tanh", std::slice::from_ref(&a), |t: &mut Tape, v: &[Var]| {
        let y = t.tanh(v[0]);
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("sigmoid", std::slice::from_ref(&a), |t: &mut Tape, v: &[Var]| {
        let y = t.sigmoid(v[0]);
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("exp", std::slice::from_ref(&a), |t: &mut Tape, v: &[Var]| {
        let y = t.exp(v[0]);
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("safe_log", std::slice::from_ref(&pos), |t: &mut Tape, v: &[Var]| {
        let y = t.safe_log(v[0])?;
        weighted(t, y, s)
    }, tol)?);
    let segments: Arc<[(usize, usize)]> = Arc::from(vec![(0, 3), (3, 1), (4, 5), (9, 3)]);
    out.push(check_all_entries("normalize_segments", std::slice::from_ref(&pos), move |t: &mut Tape, v: &[Var]| {
        let y = t.normalize_segments(v[0], segments.clone())?;
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("softmax_rows", std::slice::from_ref(&a), |t: &mut Tape, v: &[Var]| {
        let y = t.softmax_rows(v[0]);
        weighted(t, y, s)
    }, tol)?);
    out.push(check_all_entries("sum_mean", std::slice::from_ref(&a), |t: &mut Tape, v: &[Var]| {
        let sq = t.mul(v[0], v[0])?;
        let x = t.sum(sq);
        let y = t.mean(v[0]);
        let z = t.mul(x, y)?;
        Ok(z)
    }, tol)?);
    // KL between a normalized vector and a fixed reference.
    out.push(check_all_entries("kl", std::slice::from_ref(&pos), |t: &mut Tape, v: &[Var]| {
        let seg: Arc<[(usize, usize)]> = Arc::from(vec![(0, 12)]);
        let d = t.normalize_segments(v[0], seg)?;
        let q = t.constant(Matrix::filled(3, 4, 1.0 / 12.0));
        let ld = t.safe_log(d)?;
        let lq = t.safe_log(q)?;
        let diff = t.sub(ld, lq)?;
        let terms = t.mul(d, diff)?;
        Ok(t.sum(terms))
    }, tol)?);

    let (input, hidden, batch) = (3, 4, 2);
    let layer = LstmLayer::random(input, hidden, &mut rng);
    let xs: Vec<Matrix> = (0..3).map(|_| random(&mut rng, batch, input, -1.0, 1.0)).collect();
    let params = vec![layer.w.clone(), layer.u.clone(), layer.b.map(|_| 0.1), xs[0].clone(), xs[1].clone(), xs[2].clone()];
    out.push(check_all_entries("lstm_3_step", &params, move |t: &mut Tape, v: &[Var]| {
        let p = LstmVars { w: v[0], u: v[1], b: v[2] };
        let mut h = t.constant(Matrix::zeros(batch, hidden));
        let mut c = t.constant(Matrix::zeros(batch, hidden));
        for &x in &v[3..6] {
            (h, c) = lstm_cell(t, p, x, h, c)?;
        }
        let hc = t.concat_cols(&[h, c])?;
        weighted(t, hc, s)
    }, tol)?);
    Ok(out)
}
