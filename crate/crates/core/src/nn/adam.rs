use serde::{Deserialize, Serialize};

use super::{NnError, Param};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("bad Adam settings {self:?}")))
        }
    }
}

/// First and second moment estimates for one parameter array.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn zeros(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update; `t` counts from 1.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, t: u64, cfg: &AdamConfig) {
    assert!(t >= 1, "Adam step counter starts at 1");
    assert_eq!(params.len(), grads.len());
    if state.m.len() != params.len() {
        *state = AdamState::zeros(params.len());
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Optimizer over a fixed, ordered list of parameter arrays.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            states: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        self.t += 1;
        if self.states.len() != params.len() {
            self.states = params.iter().map(|p| AdamState::zeros(p.value.len())).collect();
        }
        for (p, s) in params.iter_mut().zip(&mut self.states) {
            adam_step(&mut p.value, &p.grad, s, self.t, &self.config);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_first_step() {
        let mut theta = [0.0];
        let mut s = AdamState::zeros(1);
        adam_step(&mut theta, &[1.0], &mut s, 1, &AdamConfig::default());
        let expected = -1e-4 / (1.0 + 1e-7);
        assert!((theta[0] - expected).abs() < 1e-18);
        assert!((theta[0] + 9.9999990e-5).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut theta = [0.25, -3.0];
        let mut s = AdamState::zeros(2);
        adam_step(&mut theta, &[0.0, 0.0], &mut s, 1, &AdamConfig::default());
        assert_eq!(theta, [0.25, -3.0]);
    }

    #[test]
    fn two_steps_follow_recurrence() {
        let cfg = AdamConfig::default();
        let mut theta = [0.0];
        let mut s = AdamState::zeros(1);
        adam_step(&mut theta, &[1.0], &mut s, 1, &cfg);
        adam_step(&mut theta, &[1.0], &mut s, 2, &cfg);

        // m1 = 0.1, v1 = 0.001; m2 = 0.19, v2 = 0.001999.
        let m2: f64 = 0.9 * 0.1 + 0.1;
        let v2: f64 = 0.999 * 0.001 + 0.001;
        let m_hat = m2 / (1.0 - 0.81);
        let v_hat = v2 / (1.0 - 0.998001);
        let step1 = 1e-4 * 1.0 / (1.0 + 1e-7);
        let step2 = 1e-4 * m_hat / (v_hat.sqrt() + 1e-7);
        assert!((theta[0] + step1 + step2).abs() < 1e-12);
        assert!((s.m[0] - m2).abs() < 1e-15 && (s.v[0] - v2).abs() < 1e-15);
    }
}
