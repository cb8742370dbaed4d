use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers for a fixed, ordered parameter list.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of every parameter from its gradient buffer.
    pub fn update(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Invariant(format!(
                "adam state tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.grad().is_none() {
                return Err(Error::Invariant(format!("parameter {i} has no gradient")));
            }
            if self.m[i].len() != p.len() {
                return Err(Error::Invariant(format!(
                    "moment buffer {i} has {} entries, parameter has {}",
                    self.m[i].len(),
                    p.len()
                )));
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let (data, grad) = p.data_and_grad_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..data.len() {
                let g = grad[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::update`].
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState) -> Result<()> {
    state.update(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Tensor::new(&[2], vec![1.5, -2.0]).unwrap();
        w.grad_mut();
        let mut st = AdamState::new(AdamConfig::default());
        adam_step(&mut [&mut w], &mut st).unwrap();
        assert_eq!(w.data(), &[1.5, -2.0]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = Tensor::new(&[1], vec![0.0]).unwrap();
        w.grad_mut()[0] = 1.0;
        let mut st = AdamState::new(AdamConfig::default());
        adam_step(&mut [&mut w], &mut st).unwrap();
        // m_hat = 1, v_hat = 1 after bias correction.
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((w.data()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn missing_grad_is_invariant_error() {
        let mut w = Tensor::new(&[1], vec![0.0]).unwrap();
        let mut st = AdamState::new(AdamConfig::default());
        assert!(matches!(adam_step(&mut [&mut w], &mut st), Err(Error::Invariant(_))));
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn quadratic_distance_shrinks_monotonically() {
        let mut w = Tensor::new(&[1], vec![0.0]).unwrap();
        let mut st = AdamState::new(AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        });
        let mut dist = 3.0f64;
        for k in 1..=100 {
            let x = w.data()[0];
            w.grad_mut()[0] = 2.0 * (x - 3.0);
            adam_step(&mut [&mut w], &mut st).unwrap();
            let d = (w.data()[0] - 3.0).abs();
            assert!(d < dist, "step {k}: {d} >= {dist}");
            dist = d;
        }
        assert_eq!(st.step_count(), 100);
    }
}
