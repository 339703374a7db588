use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay, applied as `theta -= lr * decay * theta`.
    pub weight_decay: f64,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            clip_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Matrix]) -> Self {
        AdamState {
            config,
            m: params.iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect(),
            v: params.iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect(),
            step: 0,
        }
    }

    /// One bias-corrected update; `params` and `grads` align with the
    /// construction order.
    pub fn update(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        let cfg = self.config;
        self.step += 1;
        let scale = match cfg.clip_norm {
            Some(limit) => {
                let norm = grads
                    .iter()
                    .flat_map(|g| g.data.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > limit { limit / norm } else { 1.0 }
            }
            None => 1.0,
        };
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
            for k in 0..p.data.len() {
                let gk = g.data[k] * scale;
                m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * gk;
                v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * gk * gk;
                let mhat = m.data[k] / c1;
                let vhat = v.data[k] / c2;
                p.data[k] -= cfg.learning_rate * (mhat / (vhat.sqrt() + cfg.epsilon) + cfg.weight_decay * p.data[k]);
            }
        }
    }
}
