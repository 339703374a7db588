//! The shared regret predictor: stacked LSTM over `concat(r, R, e_s)` with a
//! bounded fully-connected head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{LstmLayer, LstmVars, Matrix, Tape, Var};
use crate::efg::GameTree;
use crate::error::TapeError;
use crate::regret::RegretPredictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => crate::autodiff::matrix::sigmoid(x),
        }
    }
}

/// How the network output `pi` becomes the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionForm {
    /// `alpha * (r + pi)`.
    Residual,
    /// `alpha * pi`.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: usize,
    pub layers: usize,
    pub embed: usize,
    pub max_actions: usize,
    /// Rows of the embedding table; one per canonical infostate.
    pub num_infostates: usize,
    pub activation: Activation,
    pub form: PredictionForm,
    pub alpha: f64,
}

impl Architecture {
    /// Default shape for `game`: two layers of 32 units, 8-wide embeddings.
    pub fn for_game(game: &GameTree, activation: Activation, form: PredictionForm, alpha: f64) -> Self {
        Architecture {
            hidden: 32,
            layers: 2,
            embed: 8,
            max_actions: game.max_actions(),
            num_infostates: game.num_infostates(),
            activation,
            form,
            alpha,
        }
    }

    pub fn input_width(&self) -> usize {
        2 * self.max_actions + self.embed
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.hidden == 0 || self.layers == 0 || self.max_actions == 0 || self.num_infostates == 0 {
            return Err("hidden, layers, max_actions and num_infostates must be positive".into());
        }
        if !self.alpha.is_finite() {
            return Err(format!("alpha must be finite, got {}", self.alpha));
        }
        Ok(())
    }
}

/// Network parameters `theta`, shared by every infostate and player.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub architecture: Architecture,
    pub lstm: Vec<LstmLayer>,
    /// `hidden x max_actions`.
    pub head_w: Matrix,
    pub head_b: Matrix,
    /// `num_infostates x embed`.
    pub embedding: Matrix,
}

impl PredictorParams {
    /// All-zero parameters: the network output is `act(0)` everywhere.
    pub fn zeros(architecture: Architecture) -> Self {
        let a = architecture;
        let lstm = (0..a.layers)
            .map(|l| LstmLayer::zeros(if l == 0 { a.input_width() } else { a.hidden }, a.hidden))
            .collect();
        PredictorParams {
            architecture: a,
            lstm,
            head_w: Matrix::zeros(a.hidden, a.max_actions),
            head_b: Matrix::zeros(1, a.max_actions),
            embedding: Matrix::zeros(a.num_infostates, a.embed),
        }
    }

    /// Uniform `±1/sqrt(hidden)` weights, zero biases, embeddings uniform
    /// in `[-1, 1]`.
    pub fn random(architecture: Architecture, rng: &mut impl Rng) -> Self {
        let a = architecture;
        let lstm = (0..a.layers)
            .map(|l| LstmLayer::random(if l == 0 { a.input_width() } else { a.hidden }, a.hidden, rng))
            .collect();
        let k = 1.0 / (a.hidden as f64).sqrt();
        let head_w = Matrix::from_vec(
            a.hidden,
            a.max_actions,
            (0..a.hidden * a.max_actions).map(|_| rng.random_range(-k..k)).collect(),
        );
        let embedding = Matrix::from_vec(
            a.num_infostates,
            a.embed,
            (0..a.num_infostates * a.embed).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        PredictorParams {
            architecture: a,
            lstm,
            head_w,
            head_b: Matrix::zeros(1, a.max_actions),
            embedding,
        }
    }

    /// Parameter arrays in canonical order with stable names.
    pub fn named_arrays(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (l, layer) in self.lstm.iter().enumerate() {
            out.push((format!("lstm{l}.w"), &layer.w));
            out.push((format!("lstm{l}.u"), &layer.u));
            out.push((format!("lstm{l}.b"), &layer.b));
        }
        out.push(("head.w".into(), &self.head_w));
        out.push(("head.b".into(), &self.head_b));
        out.push(("embedding".into(), &self.embedding));
        out
    }

    pub fn arrays(&self) -> Vec<&Matrix> {
        self.named_arrays().into_iter().map(|(_, m)| m).collect()
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for layer in &mut self.lstm {
            out.push(&mut layer.w);
            out.push(&mut layer.u);
            out.push(&mut layer.b);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out.push(&mut self.embedding);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.arrays().iter().map(|m| m.len()).sum()
    }

    /// Length of one infostate's recurrent state: `(h, c)` per layer.
    pub fn hidden_len(&self) -> usize {
        2 * self.architecture.layers * self.architecture.hidden
    }

    /// Bounded network output `pi` for one infostate, before scaling. Updates
    /// `hidden` in place. Entries past `regret.len()` are masked off.
    ///
    /// # Panics
    /// On an infostate index outside the embedding table or action counts
    /// above `max_actions` (contract violations).
    pub fn network_output(&self, infostate: usize, regret: &[f64], cumulative: &[f64], hidden: &mut [f64]) -> Vec<f64> {
        let a = &self.architecture;
        assert!(
            infostate < a.num_infostates,
            "contract violation: infostate {infostate} outside embedding table of {}",
            a.num_infostates
        );
        let k = regret.len();
        assert!(
            k <= a.max_actions && cumulative.len() == k,
            "contract violation: action count {k} exceeds {}",
            a.max_actions
        );
        assert_eq!(hidden.len(), self.hidden_len(), "contract violation: hidden state length");
        let mut x = vec![0.0; a.input_width()];
        x[..k].copy_from_slice(regret);
        x[a.max_actions..a.max_actions + k].copy_from_slice(cumulative);
        x[2 * a.max_actions..].copy_from_slice(self.embedding.row(infostate));
        let mut input = Matrix::row_vector(x);
        let hd = a.hidden;
        for (l, layer) in self.lstm.iter().enumerate() {
            let base = 2 * l * hd;
            let h = Matrix::row_vector(hidden[base..base + hd].to_vec());
            let c = Matrix::row_vector(hidden[base + hd..base + 2 * hd].to_vec());
            let (h2, c2) = layer.step(&input, &h, &c);
            hidden[base..base + hd].copy_from_slice(&h2.data);
            hidden[base + hd..base + 2 * hd].copy_from_slice(&c2.data);
            input = h2;
        }
        let head = input.matmul(&self.head_w).add_row(&self.head_b);
        head.data[..k].iter().map(|&v| a.activation.apply(v)).collect()
    }

    /// Prediction for one infostate from `r`, the updated `R` and its
    /// recurrent state.
    pub fn predict_one(&self, infostate: usize, regret: &[f64], cumulative: &[f64], hidden: &mut [f64]) -> Vec<f64> {
        let pi = self.network_output(infostate, regret, cumulative, hidden);
        let alpha = self.architecture.alpha;
        match self.architecture.form {
            PredictionForm::Residual => regret.iter().zip(&pi).map(|(r, p)| alpha * (r + p)).collect(),
            PredictionForm::Direct => pi.iter().map(|p| alpha * p).collect(),
        }
    }

    /// Registers every array as a tape parameter in canonical order.
    pub fn register(&self, tape: &mut Tape) -> PredictorVars {
        PredictorVars {
            lstm: self.lstm.iter().map(|l| LstmVars::register(tape, l)).collect(),
            head_w: tape.param(self.head_w.clone()),
            head_b: tape.param(self.head_b.clone()),
            embedding: tape.param(self.embedding.clone()),
        }
    }
}

impl RegretPredictor for PredictorParams {
    fn init_hidden(&self) -> Vec<f64> {
        vec![0.0; self.hidden_len()]
    }

    fn predict(&self, infostate: usize, regret: &[f64], cumulative: &[f64], hidden: &mut Vec<f64>) -> Vec<f64> {
        self.predict_one(infostate, regret, cumulative, hidden)
    }

    fn check_game(&self, game: &GameTree) -> Result<(), String> {
        let a = &self.architecture;
        if game.num_infostates() != a.num_infostates || game.max_actions() > a.max_actions {
            return Err(format!(
                "predictor built for {} infostates with up to {} actions, game has {} infostates with up to {}",
                a.num_infostates,
                a.max_actions,
                game.num_infostates(),
                game.max_actions()
            ));
        }
        Ok(())
    }
}

/// Tape handles of [`PredictorParams`], in canonical order.
#[derive(Debug, Clone)]
pub struct PredictorVars {
    pub lstm: Vec<LstmVars>,
    pub head_w: Var,
    pub head_b: Var,
    pub embedding: Var,
}

impl PredictorVars {
    /// Rebuilds the handles from vars registered in canonical order.
    pub fn from_canonical(vars: &[Var], layers: usize) -> Self {
        assert_eq!(vars.len(), 3 * layers + 3, "canonical parameter count");
        PredictorVars {
            lstm: (0..layers)
                .map(|l| LstmVars {
                    w: vars[3 * l],
                    u: vars[3 * l + 1],
                    b: vars[3 * l + 2],
                })
                .collect(),
            head_w: vars[3 * layers],
            head_b: vars[3 * layers + 1],
            embedding: vars[3 * layers + 2],
        }
    }

    pub fn all(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.lstm.iter().flat_map(|l| [l.w, l.u, l.b]).collect();
        out.extend([self.head_w, self.head_b, self.embedding]);
        out
    }

    /// Batched network output for an `rows x input_width` input and per-layer
    /// `(h, c)` state; returns `(pi, new state)`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        activation: Activation,
        input: Var,
        state: &[(Var, Var)],
    ) -> Result<(Var, Vec<(Var, Var)>), TapeError> {
        let mut x = input;
        let mut next = Vec::with_capacity(state.len());
        for (layer, &(h, c)) in self.lstm.iter().zip(state) {
            let (h2, c2) = crate::autodiff::lstm_cell(tape, *layer, x, h, c)?;
            next.push((h2, c2));
            x = h2;
        }
        let lin = tape.matmul(x, self.head_w)?;
        let head = tape.add_row(lin, self.head_b)?;
        let pi = match activation {
            Activation::Tanh => tape.tanh(head),
            Activation::Sigmoid => tape.sigmoid(head),
        };
        Ok((pi, next))
    }
}
