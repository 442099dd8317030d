//! Brute-force oracle for the angle-power spectrum.
//!
//! The reference below recomputes every cell from scalar trigonometry and
//! explicit complex arithmetic, mirroring the production operation order so
//! the comparison can be exact (==) rather than approximate.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use signal_model::{angle_power_spectrum, steering_vector, ArrayGeometry};

/// Independent per-cell evaluation of |a^H y|^2.
fn reference_cell(positions: &[[f64; 3]], snapshot: &[Complex64], az: f64, el: f64) -> f64 {
    let (azr, elr) = (az.to_radians(), el.to_radians());
    let u = [elr.cos() * azr.cos(), elr.cos() * azr.sin(), elr.sin()];
    let mut acc_re = 0.0;
    let mut acc_im = 0.0;
    for (p, y) in positions.iter().zip(snapshot) {
        let phase = 2.0 * std::f64::consts::PI * (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]);
        let (a_im, a_re) = phase.sin_cos();
        // conj(a) * y, accumulated in element order.
        acc_re += a_re * y.re + a_im * y.im;
        acc_im += a_re * y.im - a_im * y.re;
    }
    acc_re * acc_re + acc_im * acc_im
}

#[test]
fn spectrum_equals_per_cell_brute_force_exactly() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for geom in [
        ArrayGeometry::default(),
        ArrayGeometry::rectangular(2, 2, 0.5).unwrap(),
        ArrayGeometry::new(vec![[0.1, -0.3, 0.2], [0.0, 0.45, -0.1], [0.7, 0.0, 0.33]])
            .unwrap(),
    ] {
        let y: Vec<Complex64> = (0..geom.len())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let spectrum = angle_power_spectrum(&geom, &y).unwrap();
        for el in 0..90 {
            for az in 0..360 {
                let expect = reference_cell(geom.positions(), &y, az as f64, el as f64);
                assert_eq!(
                    spectrum.get(az, el),
                    expect,
                    "cell ({az}, {el}) diverged from brute force"
                );
            }
        }
    }
}

#[test]
fn matched_filter_peaks_exactly_on_grid() {
    let geom = ArrayGeometry::rectangular(2, 2, 0.5).unwrap();
    let n_sq = (geom.len() * geom.len()) as f64;
    for (az0, el0) in [(0, 1), (90, 45), (213, 17), (359, 89), (180, 30)] {
        let y = steering_vector(&geom, az0 as f64, el0 as f64);
        let spectrum = angle_power_spectrum(&geom, &y).unwrap();
        assert_eq!(spectrum.argmax(), (az0, el0), "peak moved off the true direction");
        assert!((spectrum.get(az0, el0) - n_sq).abs() < 1e-9);
    }
}
