use serde::{Deserialize, Serialize};

use super::{MlpParams, NnError};

/// Bias-corrected Adam (Kingma & Ba).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams, learning_rate: f64) -> Self {
        let n = params.as_slice().len();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update to `params` using `grads`.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<(), NnError> {
        self.update(params.as_mut_slice(), grads.as_slice())
    }

    /// Update on raw parameter slices.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::Shape {
                expected: self.m.len(),
                got: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state(lr: f64) -> AdamState {
        let p = MlpParams::zeros(1, &[]).unwrap();
        AdamState::new(&p, lr)
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = scalar_state(0.1);
        let mut p = [1.5, -2.0];
        s.update(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, [1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = scalar_state(0.01);
        let mut p = [0.0, 0.0];
        s.update(&mut p, &[3.0, -0.5]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = scalar_state(0.1);
        let mut p = [0.0; 3];
        assert!(s.update(&mut p, &[0.0; 3]).is_err());
    }
}
