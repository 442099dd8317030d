//! Real spherical harmonics (degree <= 2) for view-dependent signal
//! coefficients.
//!
//! Basis values are polynomials in the unit direction, listed in the usual
//! (l, m) order: (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0),
//! (2,1), (2,2). A primitive's signal vector holds 9 in-phase coefficients
//! followed by 9 quadrature coefficients; the rendered signal is the
//! magnitude of that complex evaluation.

use scene::{SH_COEFF_COUNT, SIGNAL_DIM};

const C0: f64 = 0.28209479177387814; // 1 / (2 sqrt(pi))
const C1: f64 = 0.4886025119029199; // sqrt(3 / (4 pi))
const C2_XY: f64 = 1.0925484305920792; // sqrt(15 / (4 pi))
const C2_Z2: f64 = 0.31539156525252005; // sqrt(5 / (16 pi))
const C2_X2Y2: f64 = 0.5462742152960396; // sqrt(15 / (16 pi))

/// Basis values at a unit direction.
pub fn sh_basis(n: [f64; 3]) -> [f64; SH_COEFF_COUNT] {
    let [x, y, z] = n;
    [
        C0,
        C1 * y,
        C1 * z,
        C1 * x,
        C2_XY * x * y,
        C2_XY * y * z,
        C2_Z2 * (3.0 * z * z - 1.0),
        C2_XY * x * z,
        C2_X2Y2 * (x * x - y * y),
    ]
}

/// Gradient of each basis value with respect to the (unconstrained)
/// direction components. Callers projecting onto the sphere compose this
/// with the normalization Jacobian themselves.
pub fn sh_basis_gradient(n: [f64; 3]) -> [[f64; 3]; SH_COEFF_COUNT] {
    let [x, y, z] = n;
    [
        [0.0, 0.0, 0.0],
        [0.0, C1, 0.0],
        [0.0, 0.0, C1],
        [C1, 0.0, 0.0],
        [C2_XY * y, C2_XY * x, 0.0],
        [0.0, C2_XY * z, C2_XY * y],
        [0.0, 0.0, 6.0 * C2_Z2 * z],
        [C2_XY * z, 0.0, C2_XY * x],
        [2.0 * C2_X2Y2 * x, -2.0 * C2_X2Y2 * y, 0.0],
    ]
}

/// Rendered signal magnitude: the two real channels evaluate to an
/// (in-phase, quadrature) pair whose norm is the emitted amplitude.
pub fn signal_magnitude(signal: &[f64; SIGNAL_DIM], n: [f64; 3]) -> f64 {
    let basis = sh_basis(n);
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, b) in basis.iter().enumerate() {
        re += signal[j] * b;
        im += signal[SH_COEFF_COUNT + j] * b;
    }
    (re * re + im * im).sqrt()
}

/// Magnitude plus everything its backward pass needs: the (re, im) pair
/// and the basis values at the evaluation direction.
pub fn signal_magnitude_cached(
    signal: &[f64; SIGNAL_DIM],
    n: [f64; 3],
) -> (f64, f64, f64, [f64; SH_COEFF_COUNT]) {
    let basis = sh_basis(n);
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, b) in basis.iter().enumerate() {
        re += signal[j] * b;
        im += signal[SH_COEFF_COUNT + j] * b;
    }
    ((re * re + im * im).sqrt(), re, im, basis)
}
