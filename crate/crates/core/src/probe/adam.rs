use serde::{Deserialize, Serialize};

use super::model::{ProbeParams, ProbeShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of one tensor. `t` is the already
/// incremented step count (first step is 1).
pub fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// First/second moment accumulators shaped like the probe parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: ProbeParams,
    pub v: ProbeParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: &ProbeShape) -> Self {
        AdamState {
            m: ProbeParams::zeros(shape),
            v: ProbeParams::zeros(shape),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ProbeParams, grads: &ProbeParams, cfg: &AdamConfig) {
        self.t += 1;
        let t = self.t;
        let params = params.tensors_mut();
        let grads = grads.tensors();
        let m = self.m.tensors_mut();
        let v = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(m).zip(v) {
            adam_update(p, g, m, v, t, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let cfg = AdamConfig::default();
        for g in [1e-3, 0.5, -7.0, 1e4] {
            let (mut p, mut m, mut v) = ([0.0], [0.0], [0.0]);
            adam_update(&mut p, &[g], &mut m, &mut v, 1, &cfg);
            let expected = -cfg.lr * g / (g.abs() + cfg.epsilon);
            assert!((p[0] - expected).abs() < 1e-15);
            assert!((p[0].abs() - cfg.lr).abs() < 1e-7);
            assert_eq!(p[0].signum(), -g.signum());
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = AdamConfig::default();
        let (mut p, mut m, mut v) = ([0.25, -3.0], [0.0; 2], [0.0; 2]);
        for t in 1..=50 {
            adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, t, &cfg);
        }
        assert_eq!(p, [0.25, -3.0]);
    }
}
