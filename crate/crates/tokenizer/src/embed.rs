//! Sinusoidal Euclidean position embeddings. Distances map to phase, so
//! nearby points get nearby features and the metric survives into the
//! conditioning stream.

use autodiff::{Tape, Var};

/// Embeds a point as interleaved sin/cos features over geometrically spaced
/// frequencies: for each frequency index f and coordinate a, the pair
/// (sin(2^f pi p_a / scale), cos(2^f pi p_a / scale)). Output length 6F.
pub fn embed_euclidean(p: [f64; 3], frequencies: usize, scale: f64) -> Vec<f64> {
    assert!(p.iter().all(|v| v.is_finite()), "position must be finite");
    assert!(scale > 0.0, "embedding scale must be positive");
    let mut out = Vec::with_capacity(6 * frequencies);
    for f in 0..frequencies {
        let rate = (2.0f64).powi(f as i32) * std::f64::consts::PI / scale;
        for &coord in &p {
            let (s, c) = (rate * coord).sin_cos();
            out.push(s);
            out.push(c);
        }
    }
    out
}

/// Tape version of [`embed_euclidean`] for a 3-long position var.
pub fn embed_euclidean_on_tape(tape: &mut Tape, p: Var, frequencies: usize, scale: f64) -> Var {
    tape.sincos(p, frequencies, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn origin_embeds_to_alternating_zero_one() {
        let e = embed_euclidean([0.0; 3], 4, 5.0);
        assert_eq!(e.len(), 24);
        for pair in e.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
    }

    #[test]
    fn base_frequency_is_periodic_in_twice_the_scale() {
        let scale = 3.0;
        let a = embed_euclidean([0.7, -1.1, 2.0], 1, scale);
        let b = embed_euclidean([0.7 + 2.0 * scale, -1.1, 2.0], 1, scale);
        // Coordinate 0's sin/cos pair repeats exactly one full period later.
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
    }

    #[test]
    fn features_match_direct_trigonometry() {
        let p = [0.31, -2.7, 1.44];
        let (frequencies, scale) = (6, 10.0);
        let e = embed_euclidean(p, frequencies, scale);
        let mut k = 0;
        for f in 0..frequencies {
            let rate = (2.0f64).powi(f as i32) * std::f64::consts::PI / scale;
            for &coord in &p {
                assert_abs_diff_eq!(e[k], (rate * coord).sin(), epsilon = 1e-15);
                assert_abs_diff_eq!(e[k + 1], (rate * coord).cos(), epsilon = 1e-15);
                k += 2;
            }
        }
    }

    #[test]
    fn entries_stay_in_the_unit_interval() {
        let e = embed_euclidean([123.4, -99.9, 0.5], 8, 2.0);
        assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn tape_embedding_matches_the_plain_one() {
        let p = [1.25, -0.4, 3.3];
        let mut tape = Tape::new();
        let var = tape.leaf(p.to_vec());
        let emb = embed_euclidean_on_tape(&mut tape, var, 5, 7.0);
        assert_eq!(tape.value(emb), embed_euclidean(p, 5, 7.0).as_slice());
    }
}
