//! Antenna arrays, steering vectors, and the angle-power spectrum.

use crate::SignalError;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Azimuth bins, one per degree: 0..359.
pub const AZIMUTH_BINS: usize = 360;
/// Elevation bins, one per degree covering the upper hemisphere: 0..89.
pub const ELEVATION_BINS: usize = 90;
/// Cells in a full spectrum grid.
pub const GRID_CELLS: usize = AZIMUTH_BINS * ELEVATION_BINS;

/// Antenna element layout. Positions are in wavelengths, so steering
/// phases need no separate carrier frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self, SignalError> {
        if positions.is_empty() {
            return Err(SignalError::EmptyArray);
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SignalError::NonFinitePosition);
        }
        Ok(Self { positions })
    }

    /// Uniform linear array along the x-axis.
    pub fn linear(elements: usize, spacing_wavelengths: f64) -> Result<Self, SignalError> {
        Self::new(
            (0..elements).map(|k| [k as f64 * spacing_wavelengths, 0.0, 0.0]).collect(),
        )
    }

    /// Uniform rectangular array in the z = 0 plane.
    pub fn rectangular(
        nx: usize,
        ny: usize,
        spacing_wavelengths: f64,
    ) -> Result<Self, SignalError> {
        let mut positions = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                positions.push([
                    i as f64 * spacing_wavelengths,
                    j as f64 * spacing_wavelengths,
                    0.0,
                ]);
            }
        }
        Self::new(positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }
}

impl Default for ArrayGeometry {
    /// Four-element half-wavelength linear array — a generic small reader
    /// array for synthetic data.
    fn default() -> Self {
        Self::linear(4, 0.5).expect("static layout is valid")
    }
}

/// Unit propagation direction for azimuth/elevation in degrees.
fn unit_direction(azimuth_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Per-element array response toward (azimuth, elevation): element k is
/// e^{+j 2 pi <p_k, u>}. The positive sign in the exponent is a fixed
/// convention; it cancels in |.|^2 outputs but matters when comparing
/// intermediate phases.
pub fn steering_vector(
    geometry: &ArrayGeometry,
    azimuth_deg: f64,
    elevation_deg: f64,
) -> Vec<Complex64> {
    let u = unit_direction(azimuth_deg, elevation_deg);
    geometry
        .positions
        .iter()
        .map(|p| {
            let path = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
            Complex64::from_polar(1.0, 2.0 * PI * path)
        })
        .collect()
}

/// Beam-steered relative power on the one-degree grid. Stored
/// elevation-major: cell (az, el) lives at index el * 360 + az.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSpectrum {
    values: Vec<f64>,
}

impl AngularSpectrum {
    pub fn from_values(values: Vec<f64>) -> Result<Self, SignalError> {
        if values.len() != GRID_CELLS {
            return Err(SignalError::GridSizeMismatch {
                expected: GRID_CELLS,
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn get(&self, azimuth: usize, elevation: usize) -> f64 {
        self.values[elevation * AZIMUTH_BINS + azimuth]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Cell of the (first, in storage order) largest entry.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % AZIMUTH_BINS, best / AZIMUTH_BINS)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates Psi(az, el) = |a^H(az, el) y|^2 at every grid cell.
pub fn angle_power_spectrum(
    geometry: &ArrayGeometry,
    snapshot: &[Complex64],
) -> Result<AngularSpectrum, SignalError> {
    if snapshot.len() != geometry.len() {
        return Err(SignalError::LengthMismatch {
            expected: geometry.len(),
            got: snapshot.len(),
        });
    }
    let mut values = vec![0.0; GRID_CELLS];
    for el in 0..ELEVATION_BINS {
        for az in 0..AZIMUTH_BINS {
            let a = steering_vector(geometry, az as f64, el as f64);
            let beamformed: Complex64 =
                a.iter().zip(snapshot).map(|(ak, yk)| ak.conj() * yk).sum();
            values[el * AZIMUTH_BINS + az] = beamformed.norm_sqr();
        }
    }
    Ok(AngularSpectrum { values })
}
