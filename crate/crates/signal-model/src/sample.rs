//! Complex baseband samples and multipath superposition.

use num_complex::Complex64;

/// Wraps an angle into [-pi, pi).
pub fn wrap_phase(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on 2*pi for inputs just below -pi due to
    // rounding; fold the boundary back into range.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// A narrowband signal value in polar form: non-negative amplitude and a
/// phase in [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSample {
    amplitude: f64,
    phase: f64,
}

impl ComplexSample {
    /// Polar constructor. The phase is wrapped into [-pi, pi); the
    /// amplitude must be non-negative.
    pub fn new(amplitude: f64, phase: f64) -> Self {
        assert!(amplitude >= 0.0, "amplitude must be non-negative");
        Self { amplitude, phase: wrap_phase(phase) }
    }

    pub fn zero() -> Self {
        Self { amplitude: 0.0, phase: 0.0 }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Received power, amplitude squared.
    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// Rectangular-to-polar conversion; the zero signal gets phase 0.
    pub fn from_complex(z: Complex64) -> Self {
        if z.norm_sqr() == 0.0 {
            return Self::zero();
        }
        Self { amplitude: z.norm(), phase: wrap_phase(z.arg()) }
    }
}

/// One specular propagation path: power attenuation factor and the phase
/// the path length induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTerm {
    pub attenuation: f64,
    pub phase_shift: f64,
}

impl PathTerm {
    pub fn new(attenuation: f64, phase_shift: f64) -> Self {
        assert!(attenuation >= 0.0, "attenuation must be non-negative");
        Self { attenuation, phase_shift: wrap_phase(phase_shift) }
    }
}

/// A set of propagation paths between a transmitter and a receiver. The
/// empty channel is valid and absorbs everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultipathChannel {
    pub terms: Vec<PathTerm>,
}

impl MultipathChannel {
    pub fn new(terms: Vec<PathTerm>) -> Self {
        Self { terms }
    }

    /// Complex channel gain sum_l alpha_l e^{j phi_l}.
    pub fn gain(&self) -> Complex64 {
        self.terms
            .iter()
            .map(|t| Complex64::from_polar(t.attenuation, t.phase_shift))
            .sum()
    }
}

/// Coherent multipath reception: Y = X * sum_l alpha_l e^{j phi_l}.
pub fn superpose(x: ComplexSample, channel: &MultipathChannel) -> ComplexSample {
    ComplexSample::from_complex(x.to_complex() * channel.gain())
}

/// Received signal strength in dB relative to `p0`: 10 log10(|Y|^2 / P0).
/// A silent signal returns negative infinity; callers that need a floor
/// clamp it themselves.
pub fn rssi(y: ComplexSample, p0: f64) -> f64 {
    assert!(p0 > 0.0, "reference power must be positive");
    let power = y.power();
    if power == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (power / p0).log10()
    }
}
