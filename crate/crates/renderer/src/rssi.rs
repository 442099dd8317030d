//! Scalar RSSI readout of a rendered radiance map.
//!
//! A receiver reports one power figure, not a map, so evaluation needs a
//! pooling rule. A plain max is brittle and a plain mean washes out the
//! beam; instead the map votes through a temperature-controlled softmax
//! over standardized radiances, blended with a uniform floor so no pixel
//! is ever silenced completely.

/// Pools `pixels` into a single RSSI value in dB relative to
/// `reference_power`. An all-zero map reads as no signal: `-inf`.
pub fn rssi_from_map(pixels: &[f64], temperature: f64, uniform_mix: f64, reference_power: f64) -> f64 {
    assert!(!pixels.is_empty(), "cannot pool an empty map");
    assert!(temperature > 0.0, "temperature must be positive");
    assert!((0.0..=1.0).contains(&uniform_mix), "uniform mix must lie in [0, 1]");
    assert!(reference_power > 0.0, "reference power must be positive");

    let k = pixels.len() as f64;
    let mean = pixels.iter().sum::<f64>() / k;
    let mut z: Vec<f64> = pixels.iter().map(|p| (p - mean) / temperature).collect();
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for zi in z.iter_mut() {
        *zi = (*zi - top).exp();
        total += *zi;
    }
    let mut pooled = 0.0;
    for (zi, p) in z.iter().zip(pixels) {
        let w = (1.0 - uniform_mix) * zi / total + uniform_mix / k;
        pooled += w * p;
    }
    if pooled <= 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (pooled / reference_power).log10()
}
