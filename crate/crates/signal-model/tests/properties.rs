//! Property tests for superposition linearity, the RSSI reference-power
//! law, and spectrum sanity on random snapshots.

use num_complex::Complex64;
use proptest::prelude::*;
use signal_model::{
    angle_power_spectrum, rssi, steering_vector, superpose, ArrayGeometry, ComplexSample,
    MultipathChannel, PathTerm,
};

fn arb_sample() -> impl Strategy<Value = ComplexSample> {
    (0.0..10.0f64, -3.1..3.1f64).prop_map(|(a, th)| ComplexSample::new(a, th))
}

fn arb_channel() -> impl Strategy<Value = MultipathChannel> {
    prop::collection::vec((0.0..2.0f64, -3.1..3.1f64), 0..6)
        .prop_map(|terms| {
            MultipathChannel::new(
                terms.into_iter().map(|(a, p)| PathTerm::new(a, p)).collect(),
            )
        })
}

proptest! {
    #[test]
    fn superposition_is_linear_in_the_source(
        x in arb_sample(),
        ch in arb_channel(),
        c in 0.0..5.0f64,
    ) {
        let scaled_first = superpose(ComplexSample::new(c * x.amplitude(), x.phase()), &ch);
        let scaled_last = superpose(x, &ch);
        let expect = c * scaled_last.amplitude();
        prop_assert!((scaled_first.amplitude() - expect).abs() <= 1e-9 * expect.max(1.0));
    }

    #[test]
    fn rssi_shifts_by_the_reference_ratio(
        x in arb_sample(),
        p0 in 0.01..100.0f64,
        k in 0.01..100.0f64,
    ) {
        prop_assume!(x.amplitude() > 1e-6);
        let delta = rssi(x, p0) - rssi(x, k * p0);
        prop_assert!((delta - 10.0 * k.log10()).abs() < 1e-9);
    }

    #[test]
    fn rssi_never_exceeds_the_zero_reference_bound(
        x in arb_sample(),
    ) {
        // Any signal measured against its own power reads 0 dB.
        prop_assume!(x.amplitude() > 1e-6);
        let db = rssi(x, x.power());
        prop_assert!(db.abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectra_are_non_negative_and_finite(
        parts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 4),
    ) {
        let geom = ArrayGeometry::default();
        let y: Vec<Complex64> =
            parts.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        let spectrum = angle_power_spectrum(&geom, &y).unwrap();
        prop_assert!(spectrum.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn plane_wave_argmax_survives_positive_scaling(
        az in 0usize..360,
        el in 1usize..90,
        scale in 0.001..1000.0f64,
    ) {
        // A planar array resolves both angle components; elevation >= 1
        // keeps the direction away from the horizon where half-wavelength
        // sampling aliases the two endfire directions onto each other.
        let geom = ArrayGeometry::rectangular(2, 2, 0.5).unwrap();
        let y: Vec<Complex64> = steering_vector(&geom, az as f64, el as f64)
            .into_iter()
            .map(|z| z * scale)
            .collect();
        let spectrum = angle_power_spectrum(&geom, &y).unwrap();
        prop_assert_eq!(spectrum.argmax(), (az, el));
    }
}
