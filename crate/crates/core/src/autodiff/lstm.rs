//! Long short-term memory layer over batched rows, gate order `i, f, g, o`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Matrix};
use super::tape::{Tape, Var};
use crate::error::TapeError;

/// `gates = x W + h U + b`, each of width `4 * hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            w: Matrix::zeros(input, 4 * hidden),
            u: Matrix::zeros(hidden, 4 * hidden),
            b: Matrix::zeros(1, 4 * hidden),
        }
    }

    /// Uniform `[-1/sqrt(hidden), 1/sqrt(hidden)]` weights, zero biases.
    pub fn random(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut fill = |r, c| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-k..k)).collect());
        LstmLayer {
            w: fill(input, 4 * hidden),
            u: fill(hidden, 4 * hidden),
            b: Matrix::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.rows
    }

    pub fn input(&self) -> usize {
        self.w.rows
    }

    /// One step for a batch of rows; returns `(h', c')`.
    pub fn step(&self, x: &Matrix, h: &Matrix, c: &Matrix) -> (Matrix, Matrix) {
        let hd = self.hidden();
        let xw = x.matmul(&self.w);
        let hu = h.matmul(&self.u);
        let gates = xw.zip_map(&hu, |a, b| a + b).add_row(&self.b);
        let i = gates.col_slice(0, hd).map(sigmoid);
        let f = gates.col_slice(hd, 2 * hd).map(sigmoid);
        let g = gates.col_slice(2 * hd, 3 * hd).map(f64::tanh);
        let o = gates.col_slice(3 * hd, 4 * hd).map(sigmoid);
        let fc = f.zip_map(c, |a, b| a * b);
        let ig = i.zip_map(&g, |a, b| a * b);
        let c2 = fc.zip_map(&ig, |a, b| a + b);
        let h2 = o.zip_map(&c2.map(f64::tanh), |a, b| a * b);
        (h2, c2)
    }
}

/// Tape handles of one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

impl LstmVars {
    pub fn register(tape: &mut Tape, layer: &LstmLayer) -> Self {
        LstmVars {
            w: tape.param(layer.w.clone()),
            u: tape.param(layer.u.clone()),
            b: tape.param(layer.b.clone()),
        }
    }
}

/// Tape version of [`LstmLayer::step`]; evaluates the same operations in the
/// same order.
pub fn lstm_cell(tape: &mut Tape, p: LstmVars, x: Var, h: Var, c: Var) -> Result<(Var, Var), TapeError> {
    let hd = tape.shape(p.u).0;
    let xw = tape.matmul(x, p.w)?;
    let hu = tape.matmul(h, p.u)?;
    let sum = tape.add(xw, hu)?;
    let gates = tape.add_row(sum, p.b)?;
    let i = tape.col_slice(gates, 0, hd)?;
    let i = tape.sigmoid(i);
    let f = tape.col_slice(gates, hd, 2 * hd)?;
    let f = tape.sigmoid(f);
    let g = tape.col_slice(gates, 2 * hd, 3 * hd)?;
    let g = tape.tanh(g);
    let o = tape.col_slice(gates, 3 * hd, 4 * hd)?;
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c2 = tape.add(fc, ig)?;
    let tc = tape.tanh(c2);
    let h2 = tape.mul(o, tc)?;
    Ok((h2, c2))
}

/// Runs stacked layers over a sequence of inputs from zero state and returns
/// the top layer's output at every step.
pub fn stacked_forward(
    tape: &mut Tape,
    layers: &[LstmVars],
    inputs: &[Var],
) -> Result<Vec<Var>, TapeError> {
    let Some(&first) = inputs.first() else { return Ok(Vec::new()) };
    let batch = tape.shape(first).0;
    let mut state: Vec<(Var, Var)> = layers
        .iter()
        .map(|l| {
            let hd = tape.shape(l.u).0;
            let h = tape.constant(Matrix::zeros(batch, hd));
            let c = tape.constant(Matrix::zeros(batch, hd));
            (h, c)
        })
        .collect();
    let mut outputs = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let mut input = x;
        for (layer, s) in layers.iter().zip(state.iter_mut()) {
            let (h, c) = lstm_cell(tape, *layer, input, s.0, s.1)?;
            *s = (h, c);
            input = h;
        }
        outputs.push(input);
    }
    Ok(outputs)
}
