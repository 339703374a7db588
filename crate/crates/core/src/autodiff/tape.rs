use std::cell::Cell;
use std::sync::Arc;

use super::matrix::{sigmoid, Matrix};
use crate::error::TapeError;

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index entry that gathers a zero and scatters nowhere.
pub const SENTINEL: usize = usize::MAX;

/// Floor applied by [`Tape::safe_log`].
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    AddRow(Var, Var),
    ColSlice(Var, usize),
    ConcatCols(Vec<Var>),
    Gather(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    PositivePart(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    SafeLog(Var),
    NormalizeSegments(Var, Arc<[(usize, usize)]>),
    SoftmaxRows(Var),
    Sum(Var),
    Mean(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode differentiation tape over dense matrices.
///
/// Nodes are appended in evaluation order, so the node index is a
/// topological order and backward is a single reverse sweep.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    floored_logs: Cell<usize>,
}

/// Gradients of a scalar loss with respect to every node of a tape.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of `v`; `None` when no gradient reached it.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, or zeros shaped like `like` when nothing flowed.
    pub fn get_or_zeros(&self, v: Var, like: &Matrix) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(like.rows, like.cols))
    }
}

fn shape_err(op: &'static str, detail: String) -> TapeError {
    TapeError::Shape { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Number of `safe_log` evaluations that hit the floor.
    pub fn floored_logs(&self) -> usize {
        self.floored_logs.get()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A differentiable leaf (parameter).
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; no gradient is accumulated for it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TapeError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, node: Op) -> Result<Var, TapeError> {
        self.same_shape(op, a, b)?;
        let value = self.value(a).zip_map(self.value(b), f);
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, node, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| k * x);
        let rg = self.needs(&[a]);
        self.push(value, Op::Scale(a, k), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        if self.shape(a).1 != self.shape(b).0 {
            return Err(shape_err("matmul", format!("{:?} x {:?}", self.shape(a), self.shape(b))));
        }
        let value = self.value(a).matmul(self.value(b));
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Adds the `1 x cols` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, TapeError> {
        if self.shape(bias) != (1, self.shape(a).1) {
            return Err(shape_err("add_row", format!("{:?} + {:?}", self.shape(a), self.shape(bias))));
        }
        let value = self.value(a).add_row(self.value(bias));
        let rg = self.needs(&[a, bias]);
        Ok(self.push(value, Op::AddRow(a, bias), rg))
    }

    pub fn col_slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var, TapeError> {
        if start > end || end > self.shape(a).1 {
            return Err(shape_err("col_slice", format!("{start}..{end} of {:?}", self.shape(a))));
        }
        let value = self.value(a).col_slice(start, end);
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::ColSlice(a, start), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TapeError> {
        let rows = parts.first().map(|&p| self.shape(p).0).unwrap_or(0);
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(shape_err("concat_cols", "row counts differ".into()));
        }
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::concat_cols(&mats);
        let rg = self.needs(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// `out.data[k] = a.data[index[k]]`, zero for [`SENTINEL`].
    pub fn gather(&mut self, a: Var, index: Arc<[usize]>, rows: usize, cols: usize) -> Result<Var, TapeError> {
        if index.len() != rows * cols {
            return Err(shape_err("gather", format!("{} indices for {rows}x{cols}", index.len())));
        }
        let src = &self.value(a).data;
        let mut data = Vec::with_capacity(index.len());
        for &i in index.iter() {
            if i == SENTINEL {
                data.push(0.0);
            } else if let Some(&v) = src.get(i) {
                data.push(v);
            } else {
                return Err(shape_err("gather", format!("index {i} out of {}", src.len())));
            }
        }
        let rg = self.needs(&[a]);
        Ok(self.push(Matrix::from_vec(rows, cols, data), Op::Gather(a, index), rg))
    }

    /// `out.data[index[k]] += a.data[k]`; [`SENTINEL`] entries are dropped.
    pub fn scatter_add(&mut self, a: Var, index: Arc<[usize]>, rows: usize, cols: usize) -> Result<Var, TapeError> {
        if index.len() != self.value(a).len() {
            return Err(shape_err(
                "scatter_add",
                format!("{} indices for {} values", index.len(), self.value(a).len()),
            ));
        }
        let mut out = Matrix::zeros(rows, cols);
        for (&i, &v) in index.iter().zip(&self.value(a).data) {
            if i == SENTINEL {
                continue;
            }
            match out.data.get_mut(i) {
                Some(d) => *d += v,
                None => return Err(shape_err("scatter_add", format!("index {i} out of {}", rows * cols))),
            }
        }
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::ScatterAdd(a, index), rg))
    }

    /// `max(x, 0)`, with derivative 0 at exactly 0.
    pub fn positive_part(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.needs(&[a]);
        self.push(value, Op::PositivePart(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.needs(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.needs(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let rg = self.needs(&[a]);
        self.push(value, Op::Exp(a), rg)
    }

    /// `ln(max(x, LOG_FLOOR))`. Floored entries get zero gradient and are
    /// counted; negative inputs below `-LOG_FLOOR` are a domain error.
    pub fn safe_log(&mut self, a: Var) -> Result<Var, TapeError> {
        let mut floored = 0;
        let mut data = Vec::with_capacity(self.value(a).len());
        for &x in &self.value(a).data {
            if x < -LOG_FLOOR || x.is_nan() {
                return Err(TapeError::Domain { value: x });
            }
            if x < LOG_FLOOR {
                floored += 1;
            }
            data.push(x.max(LOG_FLOOR).ln());
        }
        self.floored_logs.set(self.floored_logs.get() + floored);
        let (r, c) = self.shape(a);
        let rg = self.needs(&[a]);
        Ok(self.push(Matrix::from_vec(r, c, data), Op::SafeLog(a), rg))
    }

    /// Normalizes each `(start, len)` segment of the flat data to sum to one.
    /// A segment without positive mass becomes uniform and passes no gradient.
    pub fn normalize_segments(&mut self, a: Var, segments: Arc<[(usize, usize)]>) -> Result<Var, TapeError> {
        let src = self.value(a);
        let mut out = Matrix::zeros(src.rows, src.cols);
        for &(start, len) in segments.iter() {
            if start + len > src.len() || len == 0 {
                return Err(shape_err("normalize_segments", format!("segment {start}+{len} of {}", src.len())));
            }
            let seg = &src.data[start..start + len];
            let mass: f64 = seg.iter().sum();
            for (k, &v) in seg.iter().enumerate() {
                out.data[start + k] = if mass > 0.0 { v / mass } else { 1.0 / len as f64 };
            }
        }
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::NormalizeSegments(a, segments), rg))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut out = src.clone();
        for r in 0..src.rows {
            let row = &mut out.data[r * src.cols..(r + 1) * src.cols];
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        let rg = self.needs(&[a]);
        self.push(out, Op::SoftmaxRows(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.needs(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let value = Matrix::scalar(m.sum() / m.len() as f64);
        let rg = self.needs(&[a]);
        self.push(value, Op::Mean(a), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TapeError> {
        let (rows, cols) = self.shape(loss);
        if (rows, cols) != (1, 1) {
            return Err(TapeError::NonScalar { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let y = &self.nodes[id].value;
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                self.accumulate(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                self.accumulate(grads, *a, g.zip_map(bv, |x, y| x / y));
                let ga = g.zip_map(y, |x, q| x * q);
                self.accumulate(grads, *b, ga.zip_map(bv, |x, y| -x / y));
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.map(|v| k * v)),
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    self.accumulate(grads, *a, g.matmul_t(self.value(*b)));
                }
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, *b, self.value(*a).t_matmul(g));
                }
            }
            Op::AddRow(a, bias) => {
                self.accumulate(grads, *a, g.clone());
                let mut gb = Matrix::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (d, v) in gb.data.iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                self.accumulate(grads, *bias, gb);
            }
            Op::ColSlice(a, start) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    ga.data[i * c + start..i * c + start + g.cols].copy_from_slice(g.row(i));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    self.accumulate(grads, *p, g.col_slice(start, start + w));
                    start += w;
                }
            }
            Op::Gather(a, index) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (&i, &v) in index.iter().zip(&g.data) {
                    if i != SENTINEL {
                        ga.data[i] += v;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ScatterAdd(a, index) => {
                let (r, c) = self.shape(*a);
                let data = index
                    .iter()
                    .map(|&i| if i == SENTINEL { 0.0 } else { g.data[i] })
                    .collect();
                self.accumulate(grads, *a, Matrix::from_vec(r, c, data));
            }
            Op::PositivePart(a) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*a), |x, v| if v > 0.0 { x } else { 0.0 }));
            }
            Op::Tanh(a) => self.accumulate(grads, *a, g.zip_map(y, |x, t| x * (1.0 - t * t))),
            Op::Sigmoid(a) => self.accumulate(grads, *a, g.zip_map(y, |x, s| x * s * (1.0 - s))),
            Op::Exp(a) => self.accumulate(grads, *a, g.zip_map(y, |x, e| x * e)),
            Op::SafeLog(a) => {
                let ga = g.zip_map(self.value(*a), |x, v| if v < LOG_FLOOR { 0.0 } else { x / v });
                self.accumulate(grads, *a, ga);
            }
            Op::NormalizeSegments(a, segments) => {
                let src = self.value(*a);
                let mut ga = Matrix::zeros(src.rows, src.cols);
                for &(start, len) in segments.iter() {
                    let mass: f64 = src.data[start..start + len].iter().sum();
                    if mass <= 0.0 {
                        continue;
                    }
                    let dot: f64 = (start..start + len).map(|k| g.data[k] * y.data[k]).sum();
                    for k in start..start + len {
                        ga.data[k] = (g.data[k] - dot) / mass;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let mut ga = Matrix::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                    for c in 0..y.cols {
                        let k = r * y.cols + c;
                        ga.data[k] = y.data[k] * (g.data[k] - dot);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(grads, *a, Matrix::filled(r, c, g.data[0]));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(grads, *a, Matrix::filled(r, c, g.data[0] / (r * c) as f64));
            }
        }
    }
}
