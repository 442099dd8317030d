//! The explicit scene representation: anisotropic 3D Gaussians acting as
//! virtual transmitters, plus anchor selection and residual application.
//!
//! Scenes are immutable; learned per-step corrections come in as a
//! [`ResidualUpdate`] and produce a fresh list of effective primitives,
//! leaving the originals untouched. All geometry conventions (quaternion
//! layout, log-scale storage) live here so downstream crates agree on them.

mod primitive;
mod residual;

pub use primitive::{
    quaternion_rotation_matrix, GaussianPrimitive, SH_COEFF_COUNT, SH_DEGREE, SIGNAL_CHANNELS,
    SIGNAL_DIM,
};
pub use residual::ResidualUpdate;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("point cloud must contain at least one point")]
    EmptyPointCloud,
    #[error("anchor count {m} exceeds primitive count {n}")]
    AnchorCountExceedsPrimitives { m: usize, n: usize },
    #[error("residual field {field} has {got} entries, scene has {expected}")]
    ResidualShapeMismatch { field: &'static str, expected: usize, got: usize },
    #[error("residual field {0} contains a non-finite entry")]
    NonFiniteResidual(&'static str),
    #[error("rotation update for primitive {0} cancelled the quaternion to zero")]
    DegenerateRotation(usize),
}

/// Defaults used when growing a scene from a bare point cloud.
#[derive(Debug, Clone)]
pub struct InitConfig {
    /// Starting opacity for every primitive.
    pub opacity: f64,
    /// Isotropic scale clamp in meters (lower, upper).
    pub scale_clamp: (f64, f64),
    /// Requested anchor count; capped at the primitive count.
    pub anchor_count: usize,
    /// Transmitter position in meters.
    pub tx_position: [f64; 3],
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            opacity: 0.1,
            scale_clamp: (0.01, 1.0),
            anchor_count: 256,
            tx_position: [0.0, 0.0, 0.0],
        }
    }
}

/// A full Gaussian scene: primitives, the transmitter they all radiate
/// from, and how many anchors the tokenizer may draw.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scene {
    pub primitives: Vec<GaussianPrimitive>,
    pub tx_position: [f64; 3],
    pub anchor_count: usize,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// One isotropic primitive per point. The scale is the point's own
    /// nearest-neighbor distance clamped to the configured range; a lone
    /// point has no neighbor, which clamps down to the upper bound.
    pub fn init_from_point_cloud(
        points: &[[f64; 3]],
        config: &InitConfig,
    ) -> Result<Self, SceneError> {
        if points.is_empty() {
            return Err(SceneError::EmptyPointCloud);
        }
        let (lo, hi) = config.scale_clamp;
        let primitives = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut nearest = f64::INFINITY;
                for (j, q) in points.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let d2 = (p[0] - q[0]).powi(2)
                        + (p[1] - q[1]).powi(2)
                        + (p[2] - q[2]).powi(2);
                    nearest = nearest.min(d2);
                }
                let scale = nearest.sqrt().clamp(lo, hi);
                GaussianPrimitive::isotropic(*p, scale, config.opacity)
            })
            .collect::<Vec<_>>();
        let anchor_count = config.anchor_count.min(primitives.len());
        Ok(Self { primitives, tx_position: config.tx_position, anchor_count })
    }

    /// Indices of the `m` highest-opacity primitives, highest first, ties
    /// resolved toward the lower index. The result is a function of the
    /// current opacities and is recomputed, not cached.
    pub fn select_anchors(&self, m: usize) -> Result<Vec<usize>, SceneError> {
        let n = self.primitives.len();
        if m > n {
            return Err(SceneError::AnchorCountExceedsPrimitives { m, n });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.primitives[b]
                .opacity
                .partial_cmp(&self.primitives[a].opacity)
                .expect("opacities are finite")
                .then(a.cmp(&b))
        });
        order.truncate(m);
        Ok(order)
    }

    /// Applies learned residuals, yielding the effective primitives the
    /// renderer consumes. `self` is left untouched.
    pub fn apply_residuals(
        &self,
        update: &ResidualUpdate,
    ) -> Result<Vec<GaussianPrimitive>, SceneError> {
        let n = self.primitives.len();
        update.validate(n)?;
        let mut effective = Vec::with_capacity(n);
        for (i, prim) in self.primitives.iter().enumerate() {
            let mut q = [0.0; 4];
            for (k, qk) in q.iter_mut().enumerate() {
                *qk = prim.rotation[k] + update.d_rotation[i][k];
            }
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(SceneError::DegenerateRotation(i));
            }
            for qk in q.iter_mut() {
                *qk /= norm;
            }

            let mut log_scale = prim.log_scale;
            for (k, ls) in log_scale.iter_mut().enumerate() {
                *ls += update.d_scaling[i][k];
            }

            let mut signal = prim.signal;
            for (k, s) in signal.iter_mut().enumerate() {
                *s += update.d_signal[i][k];
            }

            effective.push(GaussianPrimitive {
                position: prim.position,
                rotation: q,
                log_scale,
                opacity: (prim.opacity + update.d_attn[i]).clamp(0.0, 1.0),
                signal,
            });
        }
        Ok(effective)
    }
}
