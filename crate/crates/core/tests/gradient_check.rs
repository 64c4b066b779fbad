//! Backpropagation checked against central finite differences, and single
//! recurrent steps checked against scalar hand-unrolled recomputations.

use emocal_core::seqnet::{backward, mean_loss, CellKind, RecurrentModel};
use emocal_core::Level;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const MAX_REL: f64 = 1e-4;
/// Components below this magnitude are compared on an absolute scale.
const FLOOR: f64 = 1e-7;

fn batch(seed: u64, w: usize, n: usize) -> (Vec<Vec<f64>>, Vec<Level>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let windows = (0..n)
        .map(|_| (0..w).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n)
        .map(|i| if i % 2 == 0 { Level::Low } else { Level::High })
        .collect();
    (windows, labels)
}

fn perturbed(m: &RecurrentModel, tensor: usize, idx: usize, delta: f64) -> RecurrentModel {
    let mut p = m.clone();
    p.tensors_mut()[tensor].1[idx] += delta;
    p
}

/// Returns the worst relative error over every parameter component.
fn worst_relative_error(kind: CellKind, hidden: usize, w: usize, seed: u64) -> f64 {
    let m = RecurrentModel::init(kind, hidden, 1, seed);
    let (windows, labels) = batch(seed, w, 3);
    let grad = backward(&m, &windows, &labels).unwrap();
    let analytic = grad.tensors();
    let mut worst: f64 = 0.0;
    for (t, (_, _, values)) in analytic.iter().enumerate() {
        for (i, &a) in values.iter().enumerate() {
            let up = mean_loss(&perturbed(&m, t, i, EPS), &windows, &labels).unwrap();
            let down = mean_loss(&perturbed(&m, t, i, -EPS), &windows, &labels).unwrap();
            let numeric = (up - down) / (2.0 * EPS);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn finite_differences_hidden_three_window_five_seed_seven() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        let err = worst_relative_error(kind, 3, 5, 7);
        assert!(err < MAX_REL, "{kind}: relative error {err:e}");
    }
}

#[test]
fn finite_differences_across_windows_and_seeds() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        for w in [3, 8, 16] {
            for seed in [1, 2, 3] {
                let err = worst_relative_error(kind, 4, w, seed);
                assert!(
                    err < MAX_REL,
                    "{kind} W={w} seed={seed}: relative error {err:e}"
                );
            }
        }
    }
}

#[test]
fn duplicated_batch_has_same_mean_gradient() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        let m = RecurrentModel::init(kind, 3, 1, 11);
        let (windows, labels) = batch(11, 6, 4);
        let g1 = backward(&m, &windows, &labels).unwrap();
        let w2: Vec<_> = windows.iter().chain(&windows).cloned().collect();
        let l2: Vec<_> = labels.iter().chain(&labels).copied().collect();
        let g2 = backward(&m, &w2, &l2).unwrap();
        let mut diff = g1.clone();
        diff.add_scaled(-1.0, &g2);
        assert!(diff.norm() < 1e-12 * (1.0 + g1.norm()));
    }
}

#[test]
fn confident_correct_model_has_vanishing_gradient() {
    let mut m = RecurrentModel::zeros(CellKind::Gru, 2, 1);
    m.out_bias = vec![-40.0, 40.0];
    let (windows, _) = batch(5, 4, 3);
    let labels = vec![Level::High; 3];
    assert!(backward(&m, &windows, &labels).unwrap().norm() < 1e-6);
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `W[r] . [h0, h1, x] + b[r]` written out for hidden size 2, input size 1.
fn affine2(m: &RecurrentModel, gate: usize, r: usize, h: [f64; 2], x: f64) -> f64 {
    let g = &m.gates[gate];
    g.weight.get(r, 0) * h[0] + g.weight.get(r, 1) * h[1] + g.weight.get(r, 2) * x + g.bias[r]
}

#[test]
fn lstm_step_matches_scalar_recomputation() {
    let m = RecurrentModel::init(CellKind::Lstm, 2, 1, 42);
    let h = [0.3, -0.7];
    let c = [0.5, -0.2];
    let x = 0.9;
    let (ht, ct) = m.lstm_step(&[x], &h, &c).unwrap();
    for r in 0..2 {
        let f = sigmoid(affine2(&m, 0, r, h, x));
        let i = sigmoid(affine2(&m, 1, r, h, x));
        let o = sigmoid(affine2(&m, 2, r, h, x));
        let g = affine2(&m, 3, r, h, x).tanh();
        let c_new = f * c[r] + i * g;
        let h_new = o * c_new.tanh();
        assert!((ct[r] - c_new).abs() < 1e-12);
        assert!((ht[r] - h_new).abs() < 1e-12);
    }
}

#[test]
fn gru_step_matches_scalar_recomputation() {
    let m = RecurrentModel::init(CellKind::Gru, 2, 1, 42);
    let h = [0.3, -0.7];
    let x = -0.4;
    let ht = m.gru_step(&[x], &h).unwrap();
    let u = [
        sigmoid(affine2(&m, 0, 0, h, x)),
        sigmoid(affine2(&m, 0, 1, h, x)),
    ];
    let r = [
        sigmoid(affine2(&m, 1, 0, h, x)),
        sigmoid(affine2(&m, 1, 1, h, x)),
    ];
    let rh = [r[0] * h[0], r[1] * h[1]];
    for k in 0..2 {
        let n = affine2(&m, 2, k, rh, x).tanh();
        let expected = (1.0 - u[k]) * h[k] + u[k] * n;
        assert!((ht[k] - expected).abs() < 1e-12);
    }
}

#[test]
fn closed_form_zero_parameter_steps() {
    let lstm = RecurrentModel::zeros(CellKind::Lstm, 3, 1);
    let (h, c) = lstm.lstm_step(&[0.8], &[0.0; 3], &[1.0; 3]).unwrap();
    assert!(c.iter().all(|v| (v - 0.5).abs() < 1e-15));
    assert!(h.iter().all(|v| (v - 0.5 * 0.5f64.tanh()).abs() < 1e-15));
    let gru = RecurrentModel::zeros(CellKind::Gru, 3, 1);
    assert_eq!(gru.gru_step(&[0.8], &[1.0; 3]).unwrap(), vec![0.5; 3]);
    assert_eq!(gru.gru_step(&[0.8], &[0.0; 3]).unwrap(), vec![0.0; 3]);
}
