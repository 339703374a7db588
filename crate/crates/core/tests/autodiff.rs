use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use regretforge::autodiff::check::{self, primitive_suite};
use regretforge::autodiff::{AdamConfig, AdamState, LstmLayer, LstmVars, Matrix, Tape};
use regretforge::TapeError;

fn scalar_grad(f: impl Fn(&mut Tape, regretforge::autodiff::Var) -> regretforge::autodiff::Var, x: f64) -> f64 {
    let mut t = Tape::new();
    let v = t.param(Matrix::scalar(x));
    let y = f(&mut t, v);
    let g = t.backward(y).unwrap();
    g.get_or_zeros(v, &Matrix::scalar(0.0)).data[0]
}

#[test]
fn elementary_derivatives() {
    assert_eq!(scalar_grad(|t, v| t.tanh(v), 0.0), 1.0);
    assert_eq!(scalar_grad(|t, v| t.positive_part(v), -1.0), 0.0);
    assert_eq!(scalar_grad(|t, v| t.positive_part(v), 1.0), 1.0);
    assert_eq!(scalar_grad(|t, v| t.positive_part(v), 0.0), 0.0);
    assert_abs_diff_eq!(scalar_grad(|t, v| t.sigmoid(v), 0.0), 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(scalar_grad(|t, v| t.exp(v), 1.0), 1f64.exp(), epsilon = 1e-15);
}

#[test]
fn product_and_diamond() {
    let mut t = Tape::new();
    let x = t.param(Matrix::scalar(2.0));
    let y = t.param(Matrix::scalar(3.0));
    let z = t.mul(x, y).unwrap();
    let g = t.backward(z).unwrap();
    assert_eq!(g.get(x).unwrap().data[0], 3.0);
    assert_eq!(g.get(y).unwrap().data[0], 2.0);

    let mut t = Tape::new();
    let x = t.param(Matrix::scalar(1.0));
    let s = t.add(x, x).unwrap();
    let z = t.mul(s, x).unwrap();
    assert_eq!(t.backward(z).unwrap().get(x).unwrap().data[0], 4.0);
}

#[test]
fn errors_are_reported() {
    let mut t = Tape::new();
    let a = t.param(Matrix::zeros(2, 3));
    let b = t.param(Matrix::zeros(3, 2));
    assert!(matches!(t.add(a, b), Err(TapeError::Shape { op: "add", .. })));
    assert!(matches!(t.matmul(a, a), Err(TapeError::Shape { .. })));
    assert!(matches!(t.backward(a), Err(TapeError::NonScalar { rows: 2, cols: 3 })));
    let neg = t.param(Matrix::row_vector(vec![0.5, -0.1]));
    assert!(matches!(t.safe_log(neg), Err(TapeError::Domain { .. })));
    let tiny = t.param(Matrix::row_vector(vec![0.0, 1e-13, 0.5]));
    let l = t.safe_log(tiny).unwrap();
    assert_eq!(t.floored_logs(), 2);
    assert_abs_diff_eq!(t.value(l).data[0], 1e-12f64.ln(), epsilon = 1e-12);
}

#[test]
fn zero_mass_normalization_passes_no_gradient() {
    let mut t = Tape::new();
    let x = t.param(Matrix::row_vector(vec![0.0, 0.0, 0.0, 1.0, 3.0]));
    let seg: Arc<[(usize, usize)]> = Arc::from(vec![(0, 3), (3, 2)]);
    let y = t.normalize_segments(x, seg).unwrap();
    assert_eq!(t.value(y).data, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.25, 0.75]);
    let w = t.constant(Matrix::row_vector(vec![5.0, -1.0, 2.0, 1.0, 0.0]));
    let p = t.mul(y, w).unwrap();
    let s = t.sum(p);
    let g = t.backward(s).unwrap();
    let gx = &g.get(x).unwrap().data;
    assert_eq!(&gx[..3], &[0.0, 0.0, 0.0]);
    // d/dx0 of x0/(x0+x1) * 1 at (1, 3): 3/16.
    assert_abs_diff_eq!(gx[3], 3.0 / 16.0, epsilon = 1e-15);
}

#[test]
fn kl_gradient_vanishes_at_equal_distributions() {
    // Gradient of KL(normalize(x) || q) at normalize(x) = q is zero.
    let q = vec![0.2, 0.3, 0.5];
    let mut t = Tape::new();
    let x = t.param(Matrix::row_vector(q.iter().map(|v| v * 4.0).collect()));
    let seg: Arc<[(usize, usize)]> = Arc::from(vec![(0, 3)]);
    let d = t.normalize_segments(x, seg).unwrap();
    let qv = t.constant(Matrix::row_vector(q));
    let ld = t.safe_log(d).unwrap();
    let lq = t.safe_log(qv).unwrap();
    let diff = t.sub(ld, lq).unwrap();
    let terms = t.mul(d, diff).unwrap();
    let kl = t.sum(terms);
    let g = t.backward(kl).unwrap();
    assert!(g.get(x).unwrap().max_abs() <= 1e-15);
}

#[test]
fn every_primitive_passes_gradcheck() {
    for seed in [1, 2, 3] {
        for c in primitive_suite(seed).unwrap() {
            assert!(c.passed(), "{} error {}", c.name, c.max_rel_error);
        }
    }
}

#[test]
fn lstm_zero_weights_give_zero_output() {
    let layer = LstmLayer::zeros(5, 3);
    let x = Matrix::filled(2, 5, 0.7);
    let (h, c) = layer.step(&x, &Matrix::zeros(2, 3), &Matrix::zeros(2, 3));
    assert!(h.max_abs() == 0.0 && c.max_abs() == 0.0);
}

#[test]
fn lstm_forget_bias_preserves_cell() {
    let mut layer = LstmLayer::zeros(2, 3);
    for k in 3..6 {
        layer.b.data[k] = 10.0;
    }
    // Input gate closed so the candidate cannot write.
    for k in 0..3 {
        layer.b.data[k] = -30.0;
    }
    let c0 = Matrix::from_vec(1, 3, vec![0.3, -0.4, 0.2]);
    let mut h = Matrix::zeros(1, 3);
    let mut c = c0.clone();
    for _ in 0..5 {
        (h, c) = layer.step(&Matrix::zeros(1, 2), &h, &c);
    }
    let keep = (1.0 / (1.0 + (-10f64).exp())).powi(5);
    for (a, b) in c.data.iter().zip(&c0.data) {
        assert!((a - b).abs() <= 1e-4);
        assert_abs_diff_eq!(*a, keep * b, epsilon = 1e-12);
    }
}

#[test]
fn lstm_tape_matches_plain_bitwise() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let layer = LstmLayer::random(4, 3, &mut rng);
    let x = Matrix::from_vec(2, 4, vec![0.1, -0.2, 0.3, 0.9, -1.0, 0.5, 0.0, 0.25]);
    let h = Matrix::from_vec(2, 3, vec![0.1, 0.2, -0.3, 0.0, 0.4, 0.5]);
    let c = Matrix::from_vec(2, 3, vec![-0.1, 0.2, 0.7, 1.0, 0.0, -0.5]);
    let (h1, c1) = layer.step(&x, &h, &c);
    let mut t = Tape::new();
    let p = LstmVars::register(&mut t, &layer);
    let (xv, hv, cv) = (t.constant(x), t.constant(h), t.constant(c));
    let (h2, c2) = regretforge::autodiff::lstm_cell(&mut t, p, xv, hv, cv).unwrap();
    assert_eq!(t.value(h2), &h1);
    assert_eq!(t.value(c2), &c1);
    let hs = regretforge::autodiff::stacked_forward(&mut t, &[p, p], &[]).unwrap();
    assert!(hs.is_empty());
}

use rand::SeedableRng;

#[test]
fn adam_examples() {
    let cfg = AdamConfig::default();
    let mut p = Matrix::scalar(0.5);
    let mut st = AdamState::new(cfg, &[&p]);
    st.update(&mut [&mut p], &[Matrix::scalar(1.0)]);
    assert_abs_diff_eq!(p.data[0], 0.5 - 0.001, epsilon = 1e-10);
    assert_eq!(st.step, 1);

    let mut q = Matrix::from_vec(1, 3, vec![1.0, -2.0, 3.0]);
    let before = q.clone();
    let mut st = AdamState::new(cfg, &[&q]);
    st.update(&mut [&mut q], &[Matrix::zeros(1, 3)]);
    assert_eq!(q, before);

    // Convex quadratic.
    let mut theta = Matrix::from_vec(1, 4, vec![0.3, -0.2, 0.1, 0.05]);
    let mut st = AdamState::new(AdamConfig { learning_rate: 0.01, ..cfg }, &[&theta]);
    for _ in 0..200 {
        let g = theta.map(|v| 2.0 * v);
        st.update(&mut [&mut theta], &[g]);
    }
    let loss: f64 = theta.data.iter().map(|v| v * v).sum();
    assert!(loss < 1e-6, "{loss}");
}

#[test]
fn adam_clips_and_decays() {
    let cfg = AdamConfig {
        clip_norm: Some(1.0),
        weight_decay: 0.1,
        ..AdamConfig::default()
    };
    let mut p = Matrix::scalar(2.0);
    let mut st = AdamState::new(cfg, &[&p]);
    st.update(&mut [&mut p], &[Matrix::scalar(100.0)]);
    assert_abs_diff_eq!(p.data[0], 2.0 - 1e-3 * (1.0 + 0.2), epsilon = 1e-9);
}

#[test]
fn backward_is_deterministic() {
    let run = || {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let first = LstmLayer::random(3, 4, &mut rng);
        let second = LstmLayer::random(4, 4, &mut rng);
        let mut t = Tape::new();
        let p = LstmVars::register(&mut t, &first);
        let q = LstmVars::register(&mut t, &second);
        let x = t.constant(Matrix::filled(2, 3, 0.3));
        let outs = regretforge::autodiff::stacked_forward(&mut t, &[p, q], &[x, x, x]).unwrap();
        let l = t.sum(*outs.last().unwrap());
        let g = t.backward(l).unwrap();
        g.get(p.w).unwrap().clone()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn randomized_primitive_checks(seed in any::<u64>()) {
        for c in primitive_suite(seed).unwrap() {
            prop_assert!(c.passed(), "{} error {}", c.name, c.max_rel_error);
        }
    }
}

#[test]
fn relative_error_floor() {
    assert_eq!(check::relative_error(1.0, 1.0), 0.0);
    assert!(check::relative_error(1e-9, 0.0) <= 1e-3);
}
