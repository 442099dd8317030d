use crate::GaError;
use std::fmt;

/// Metric signature (p, q, r) with p + q + r = 4.
///
/// Basis vectors are ordered e1..e4; the first `p` square to +1, the next
/// `q` to -1 and the last `r` to 0. The workspace default is G(3,0,1),
/// where e1..e3 span Euclidean space and e4 is the degenerate direction;
/// G(3,1,0) gives e4 the Minkowski sign instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    p: u8,
    q: u8,
    r: u8,
}

impl Signature {
    /// Builds a signature, checking p + q + r == 4.
    pub fn new(p: u8, q: u8, r: u8) -> Result<Self, GaError> {
        if p + q + r != 4 {
            return Err(GaError::InvalidSignature { p, q, r });
        }
        Ok(Self { p, q, r })
    }

    /// G(3,0,1): Euclidean with one degenerate basis vector.
    pub const fn euclidean_pga() -> Self {
        Self { p: 3, q: 0, r: 1 }
    }

    /// G(3,1,0): Minkowski, e4 squares to -1.
    pub const fn minkowski() -> Self {
        Self { p: 3, q: 1, r: 0 }
    }

    pub fn p(&self) -> u8 {
        self.p
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn r(&self) -> u8 {
        self.r
    }

    /// Square of basis vector `axis` (0-based, so axis 0 is e1).
    pub fn metric(&self, axis: usize) -> f64 {
        debug_assert!(axis < 4);
        if axis < self.p as usize {
            1.0
        } else if axis < (self.p + self.q) as usize {
            -1.0
        } else {
            0.0
        }
    }
}

impl Default for Signature {
    fn default() -> Self {
        Self::euclidean_pga()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G({},{},{})", self.p, self.q, self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_follows_signature() {
        let pga = Signature::euclidean_pga();
        assert_eq!(pga.metric(0), 1.0);
        assert_eq!(pga.metric(2), 1.0);
        assert_eq!(pga.metric(3), 0.0);

        let mink = Signature::minkowski();
        assert_eq!(mink.metric(2), 1.0);
        assert_eq!(mink.metric(3), -1.0);
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(Signature::new(3, 0, 0).is_err());
        assert!(Signature::new(4, 1, 0).is_err());
        assert!(Signature::new(2, 1, 1).is_ok());
    }
}
