//! Per-primitive residual corrections produced by the mapping network.

use crate::{SceneError, SIGNAL_DIM};

/// Additive corrections, one entry per primitive. Rotation residuals live
/// in raw quaternion space (renormalized on application), scaling residuals
/// in log-scale space, and `d_attn` shifts opacity before its clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualUpdate {
    pub d_rotation: Vec<[f64; 4]>,
    pub d_scaling: Vec<[f64; 3]>,
    pub d_signal: Vec<[f64; SIGNAL_DIM]>,
    pub d_attn: Vec<f64>,
}

impl ResidualUpdate {
    pub fn zeros(n: usize) -> Self {
        Self {
            d_rotation: vec![[0.0; 4]; n],
            d_scaling: vec![[0.0; 3]; n],
            d_signal: vec![[0.0; SIGNAL_DIM]; n],
            d_attn: vec![0.0; n],
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), SceneError> {
        let checks: [(&'static str, usize); 4] = [
            ("d_rotation", self.d_rotation.len()),
            ("d_scaling", self.d_scaling.len()),
            ("d_signal", self.d_signal.len()),
            ("d_attn", self.d_attn.len()),
        ];
        for (field, got) in checks {
            if got != n {
                return Err(SceneError::ResidualShapeMismatch { field, expected: n, got });
            }
        }
        if self.d_rotation.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteResidual("d_rotation"));
        }
        if self.d_scaling.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteResidual("d_scaling"));
        }
        if self.d_signal.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteResidual("d_signal"));
        }
        if self.d_attn.iter().any(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteResidual("d_attn"));
        }
        Ok(())
    }
}
