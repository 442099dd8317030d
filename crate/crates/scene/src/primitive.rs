//! The Gaussian primitive and its geometric conventions.

/// Spherical-harmonics degree carried per primitive.
pub const SH_DEGREE: usize = 2;
/// Coefficients for a degree-2 real SH expansion.
pub const SH_COEFF_COUNT: usize = (SH_DEGREE + 1) * (SH_DEGREE + 1);
/// Real channels per coefficient (in-phase and quadrature).
pub const SIGNAL_CHANNELS: usize = 2;
/// Flattened signal-coefficient length.
pub const SIGNAL_DIM: usize = SH_COEFF_COUNT * SIGNAL_CHANNELS;

/// One anisotropic Gaussian acting as a virtual transmitter.
///
/// Rotation is a unit quaternion stored (w, x, y, z); scales are stored as
/// logarithms so every update keeps them strictly positive. The signal
/// vector interleaves nothing: it is `SH_COEFF_COUNT` in-phase values
/// followed by `SH_COEFF_COUNT` quadrature values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianPrimitive {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
    pub log_scale: [f64; 3],
    pub opacity: f64,
    #[serde(with = "serde_signal")]
    pub signal: [f64; SIGNAL_DIM],
}

impl GaussianPrimitive {
    /// Sphere of the given radius with identity orientation and silent
    /// signal coefficients.
    pub fn isotropic(position: [f64; 3], scale: f64, opacity: f64) -> Self {
        assert!(scale > 0.0, "scale must be positive");
        Self {
            position,
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [scale.ln(); 3],
            opacity: opacity.clamp(0.0, 1.0),
            signal: [0.0; SIGNAL_DIM],
        }
    }

    /// Scales in meters, exponentiated out of log storage.
    pub fn scale(&self) -> [f64; 3] {
        [self.log_scale[0].exp(), self.log_scale[1].exp(), self.log_scale[2].exp()]
    }

    /// World-space 3x3 covariance R diag(s^2) R^T.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let r = quaternion_rotation_matrix(&self.rotation);
        let s = self.scale();
        let mut cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, sk) in s.iter().enumerate() {
                    cov[i][j] += r[i][k] * sk * sk * r[j][k];
                }
            }
        }
        cov
    }
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
pub fn quaternion_rotation_matrix(q: &[f64; 4]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = *q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Serde helpers for the fixed-size signal array (larger than serde's
/// built-in array support).
mod serde_signal {
    use super::SIGNAL_DIM;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; SIGNAL_DIM], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; SIGNAL_DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into().map_err(|v: Vec<f64>| {
            serde::de::Error::invalid_length(v.len(), &"a signal vector of length 18")
        })
    }
}
