//! Structural similarity between two radiance maps.
//!
//! Local means, variances, and covariance come from a separable Gaussian
//! window; near the borders the window renormalizes over its in-bounds
//! support, so the map keeps its full size. The similarity of a map with
//! itself is exactly 1: both operands run through byte-identical
//! expressions, so numerator and denominator agree bit for bit.

use crate::TrainerError;
use autodiff::{Tape, Var};
use std::sync::Arc;

/// Window shape for the local statistics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SsimConfig {
    /// Side length of the square window; odd.
    pub window: usize,
    /// Standard deviation of the Gaussian taper, in pixels.
    pub sigma: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5 }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(TrainerError::InvalidConfig("SSIM window must be odd"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(TrainerError::InvalidConfig("SSIM sigma must be positive"));
        }
        Ok(())
    }
}

/// Unit-sum 1D Gaussian taps for a separable window.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let mut taps: Vec<f64> =
        (0..size).map(|i| (-((i as f64 - c) * (i as f64 - c)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= total;
    }
    taps
}

/// Mean local SSIM of two equally-shaped maps, recorded on the tape.
/// `c1` and `c2` are the usual stabilizers (0.01·L)² and (0.03·L)².
pub fn ssim_on_tape(
    tape: &mut Tape,
    a: Var,
    b: Var,
    height: usize,
    width: usize,
    c1: f64,
    c2: f64,
    kernel: &Arc<Vec<f64>>,
) -> Var {
    let mu_a = tape.conv_sep2d(a, height, width, kernel.clone());
    let mu_b = tape.conv_sep2d(b, height, width, kernel.clone());
    let aa = tape.mul(a, a);
    let bb = tape.mul(b, b);
    let ab = tape.mul(a, b);
    let m_aa = tape.conv_sep2d(aa, height, width, kernel.clone());
    let m_bb = tape.conv_sep2d(bb, height, width, kernel.clone());
    let m_ab = tape.conv_sep2d(ab, height, width, kernel.clone());
    let mu_a2 = tape.mul(mu_a, mu_a);
    let mu_b2 = tape.mul(mu_b, mu_b);
    let mu_ab = tape.mul(mu_a, mu_b);
    let var_a = tape.sub(m_aa, mu_a2);
    let var_b = tape.sub(m_bb, mu_b2);
    let cov = tape.sub(m_ab, mu_ab);

    let two_mu = tape.scale(mu_ab, 2.0);
    let two_cov = tape.scale(cov, 2.0);
    let lum_num = tape.add_const(two_mu, c1);
    let con_num = tape.add_const(two_cov, c2);
    let numerator = tape.mul(lum_num, con_num);
    let mu_sum = tape.add(mu_a2, mu_b2);
    let var_sum = tape.add(var_a, var_b);
    let lum_den = tape.add_const(mu_sum, c1);
    let con_den = tape.add_const(var_sum, c2);
    let denominator = tape.mul(lum_den, con_den);
    let map = tape.div(numerator, denominator);
    tape.mean(map)
}

/// Plain SSIM evaluation. `dynamic_range` is the data range L the
/// stabilizers are scaled by; the caller provides it so batches share one
/// range.
pub fn ssim(
    a: &[f64],
    b: &[f64],
    height: usize,
    width: usize,
    dynamic_range: f64,
    config: &SsimConfig,
) -> Result<f64, TrainerError> {
    config.validate()?;
    if a.len() != height * width {
        return Err(TrainerError::SizeMismatch {
            what: "first SSIM operand",
            expected: height * width,
            got: a.len(),
        });
    }
    if b.len() != a.len() {
        return Err(TrainerError::SizeMismatch {
            what: "second SSIM operand",
            expected: a.len(),
            got: b.len(),
        });
    }
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(TrainerError::InvalidConfig("dynamic range must be positive and finite"));
    }
    let kernel = Arc::new(gaussian_window(config.window, config.sigma));
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let mut tape = Tape::new();
    let av = tape.leaf(a.to_vec());
    let bv = tape.leaf(b.to_vec());
    let out = ssim_on_tape(&mut tape, av, bv, height, width, c1, c2, &kernel);
    Ok(tape.value(out)[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_grid(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(90);
        let a = random_grid(&mut rng, 16 * 24);
        let got = ssim(&a, &a, 16, 24, 1.0, &SsimConfig::default()).unwrap();
        assert_eq!(got, 1.0);
    }

    #[test]
    fn ssim_is_symmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(91);
        let a = random_grid(&mut rng, 20 * 20);
        let b = random_grid(&mut rng, 20 * 20);
        let ab = ssim(&a, &b, 20, 20, 1.0, &SsimConfig::default()).unwrap();
        let ba = ssim(&b, &a, 20, 20, 1.0, &SsimConfig::default()).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
    }

    #[test]
    fn constant_offset_matches_the_scalar_formula() {
        // Two constant maps have zero variances everywhere, so every local
        // window reduces to the scalar SSIM of the two constants.
        let l: f64 = 2.5;
        let a = vec![0.75; 15 * 13];
        let b = vec![0.75 + l; 15 * 13];
        let c1 = (0.01 * l).powi(2);
        let c2 = (0.03 * l).powi(2);
        let mu_a = 0.75;
        let mu_b = 0.75 + l;
        let want = ((2.0 * mu_a * mu_b + c1) * c2) / ((mu_a * mu_a + mu_b * mu_b + c1) * c2);
        let got = ssim(&a, &b, 15, 13, l, &SsimConfig::default()).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        assert!(got < 1.0);
    }

    #[test]
    fn matches_a_direct_sliding_window_reference() {
        // Independent evaluation: explicit per-pixel window loops with
        // border renormalization over the separable taps.
        let mut rng = ChaCha20Rng::seed_from_u64(92);
        let (h, w) = (32, 32);
        let a = random_grid(&mut rng, h * w);
        let b = random_grid(&mut rng, h * w);
        let l: f64 = 1.0;
        let cfg = SsimConfig::default();
        let taps = gaussian_window(cfg.window, cfg.sigma);
        let c = cfg.window / 2;
        let c1 = (0.01 * l).powi(2);
        let c2 = (0.03 * l).powi(2);

        let weight = |i: usize, j: usize, row: usize, col: usize| -> f64 {
            // Per-axis taps renormalized over the in-bounds range, exactly
            // as a separable convolution with per-line renormalization.
            let mut row_norm = 0.0;
            for r in row.saturating_sub(c)..=(row + c).min(h - 1) {
                row_norm += taps[r + c - row];
            }
            let mut col_norm = 0.0;
            for s in col.saturating_sub(c)..=(col + c).min(w - 1) {
                col_norm += taps[s + c - col];
            }
            (taps[i + c - row] / row_norm) * (taps[j + c - col] / col_norm)
        };

        let mut total = 0.0;
        for row in 0..h {
            for col in 0..w {
                let (mut ma, mut mb, mut maa, mut mbb, mut mab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in row.saturating_sub(c)..=(row + c).min(h - 1) {
                    for j in col.saturating_sub(c)..=(col + c).min(w - 1) {
                        let wgt = weight(i, j, row, col);
                        let (x, y) = (a[i * w + j], b[i * w + j]);
                        ma += wgt * x;
                        mb += wgt * y;
                        maa += wgt * x * x;
                        mbb += wgt * y * y;
                        mab += wgt * x * y;
                    }
                }
                let (va, vb, cab) = (maa - ma * ma, mbb - mb * mb, mab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        let want = total / (h * w) as f64;
        let got = ssim(&a, &b, h, w, l, &cfg).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-10);
    }

    #[test]
    fn ssim_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(93);
        let (h, w) = (9, 7);
        let a = random_grid(&mut rng, h * w);
        let b = random_grid(&mut rng, h * w);
        let kernel = Arc::new(gaussian_window(5, 1.5));
        let (c1, c2) = (1e-4, 9e-4);

        let mut tape = Tape::new();
        let av = tape.leaf(a.clone());
        let bv = tape.leaf(b.clone());
        let out = ssim_on_tape(&mut tape, av, bv, h, w, c1, c2, &kernel);
        let grads = tape.backward(out).unwrap();
        let ga = grads.get(av);

        let eval = |a: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let av = tape.leaf(a.to_vec());
            let bv = tape.leaf(b.clone());
            let out = ssim_on_tape(&mut tape, av, bv, h, w, c1, c2, &kernel);
            tape.value(out)[0]
        };
        let hstep = 1e-6;
        for k in [0, 5, 17, 30, 44, 62] {
            let mut plus = a.clone();
            plus[k] += hstep;
            let mut minus = a.clone();
            minus[k] -= hstep;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * hstep);
            assert_abs_diff_eq!(ga[k], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn bad_shapes_and_ranges_are_rejected() {
        let a = vec![0.0; 12];
        assert!(matches!(
            ssim(&a, &a, 3, 5, 1.0, &SsimConfig::default()),
            Err(TrainerError::SizeMismatch { .. })
        ));
        assert!(matches!(
            ssim(&a, &a[..8], 3, 4, 1.0, &SsimConfig::default()),
            Err(TrainerError::SizeMismatch { .. })
        ));
        assert!(matches!(
            ssim(&a, &a, 3, 4, 0.0, &SsimConfig::default()),
            Err(TrainerError::InvalidConfig(_))
        ));
        let even = SsimConfig { window: 10, sigma: 1.5 };
        assert!(matches!(
            ssim(&a, &a, 3, 4, 1.0, &even),
            Err(TrainerError::InvalidConfig(_))
        ));
    }
}
