// SPDX-License-Identifier: Apache-2.0

use super::model::{Gradients, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "adam: parameter/gradient length");
    assert_eq!(params.len(), state.m.len(), "adam: state length");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Model parameters flattened in layer order: weights then bias of each layer.
pub fn flatten_params(model: &Model) -> Vec<f64> {
    model
        .layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(&l.bias))
        .copied()
        .collect()
}

pub fn flatten_grads(grads: &Gradients) -> Vec<f64> {
    grads
        .layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(&l.bias))
        .copied()
        .collect()
}

/// Inverse of [`flatten_params`].
pub fn unflatten_params(model: &mut Model, flat: &[f64]) {
    let mut at = 0;
    for l in &mut model.layers {
        for dst in [&mut l.weight, &mut l.bias] {
            let n = dst.len();
            dst.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
    }
    assert_eq!(at, flat.len(), "flat parameter length");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default());
        assert_eq!(p, vec![0.5, -1.0]);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let g = [0.3, -2.0, 1e-4];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &g, &mut s, &cfg);
        for (p, g) in p.iter().zip(g) {
            let want = -cfg.lr * g / (g.abs() + cfg.epsilon);
            assert!((p - want).abs() <= 1e-15, "{p} vs {want}");
        }
    }

    #[test]
    fn two_steps_match_hand_recurrence() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let (g1, g2) = (0.5, -0.25);
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[g1], &mut s, &cfg);
        adam_step(&mut p, &[g2], &mut s, &cfg);

        let m1 = 0.1 * g1;
        let v1 = 0.001 * g1 * g1;
        let p1 = 1.0 - 0.1 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 0.1 * g2;
        let v2 = 0.999 * v1 + 0.001 * g2 * g2;
        let c1 = 1.0 - 0.9f64 * 0.9;
        let c2 = 1.0 - 0.999f64 * 0.999;
        let p2 = p1 - 0.1 * (m2 / c1) / ((v2 / c2).sqrt() + 1e-8);
        assert!((p[0] - p2).abs() < 1e-14, "{} vs {p2}", p[0]);
    }
}
