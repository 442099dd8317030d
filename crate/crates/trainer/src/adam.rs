//! Adam-style first-order optimizer over a list of parameter tensors.

use crate::TrainerError;

/// Step size and moment decay rates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainerError::InvalidConfig("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainerError::InvalidConfig("moment decays must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(TrainerError::InvalidConfig("epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates, one pair per tensor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: usize,
}

impl AdamState {
    /// Zero moments for tensors of the given lengths.
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One bias-corrected update of every tensor in place.
    pub fn apply(
        &mut self,
        config: &AdamConfig,
        params: &mut [&mut Vec<f64>],
        grads: &[Vec<f64>],
    ) -> Result<(), TrainerError> {
        config.validate()?;
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TrainerError::SizeMismatch {
                what: "optimizer tensor list",
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - config.beta1.powi(self.step as i32);
        let bc2 = 1.0 - config.beta2.powi(self.step as i32);
        for ((tensor, grad), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if tensor.len() != m.len() || grad.len() != m.len() {
                return Err(TrainerError::SizeMismatch {
                    what: "optimizer tensor length",
                    expected: m.len(),
                    got: tensor.len().max(grad.len()),
                });
            }
            for i in 0..m.len() {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                tensor[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
        Ok(())
    }
}
