use crate::blade::{blade_grade, blade_mask, mask_to_index, reorder_sign, BLADE_COUNT};
use crate::{GaError, Signature};
use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

/// Precomputed products of basis blades for one signature.
///
/// `entry[i][j] = (k, c)` means `blade_i * blade_j = c * blade_k`; a zero
/// coefficient marks products annihilated by a degenerate metric factor.
#[derive(Debug)]
pub struct CayleyTable {
    signature: Signature,
    entries: [[(usize, f64); BLADE_COUNT]; BLADE_COUNT],
}

impl CayleyTable {
    fn build(signature: Signature) -> Self {
        let mut entries = [[(0usize, 0.0f64); BLADE_COUNT]; BLADE_COUNT];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let a = blade_mask(i);
                let b = blade_mask(j);
                let mut coef = reorder_sign(a, b);
                let mut common = a & b;
                while common != 0 {
                    let axis = common.trailing_zeros() as usize;
                    coef *= signature.metric(axis);
                    common &= common - 1;
                }
                *cell = (mask_to_index(a ^ b), coef);
            }
        }
        Self { signature, entries }
    }

    /// Table for a signature, built once and cached for the process.
    pub fn get(signature: Signature) -> &'static CayleyTable {
        static CACHE: OnceLock<Mutex<HashMap<Signature, &'static CayleyTable>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("cayley cache poisoned");
        map.entry(signature)
            .or_insert_with(|| Box::leak(Box::new(CayleyTable::build(signature))))
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Product of basis blades `i * j` as (result index, coefficient).
    pub fn product(&self, i: usize, j: usize) -> (usize, f64) {
        self.entries[i][j]
    }

    /// All nonzero table entries as (i, j, k, coef) with `blade_i * blade_j
    /// = coef * blade_k`. Used to drive table-based bilinear ops elsewhere.
    pub fn nonzero_triples(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..BLADE_COUNT {
            for j in 0..BLADE_COUNT {
                let (k, c) = self.entries[i][j];
                if c != 0.0 {
                    out.push((i, j, k, c));
                }
            }
        }
        out
    }
}

/// A general element of the algebra: 16 blade coefficients in canonical
/// order plus the signature they were built over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multivector {
    coeffs: [f64; BLADE_COUNT],
    signature: Signature,
}

impl Multivector {
    pub fn zero(signature: Signature) -> Self {
        Self { coeffs: [0.0; BLADE_COUNT], signature }
    }

    pub fn scalar(signature: Signature, value: f64) -> Self {
        let mut mv = Self::zero(signature);
        mv.coeffs[0] = value;
        mv
    }

    /// Basis vector e(axis+1) for axis in 0..4.
    pub fn basis_vector(signature: Signature, axis: usize) -> Self {
        assert!(axis < 4, "axis out of range");
        let mut mv = Self::zero(signature);
        mv.coeffs[1 + axis] = 1.0;
        mv
    }

    /// Grade-1 element x1 e1 + x2 e2 + x3 e3 + x4 e4.
    pub fn vector(signature: Signature, x: [f64; 4]) -> Self {
        let mut mv = Self::zero(signature);
        mv.coeffs[1..5].copy_from_slice(&x);
        mv
    }

    /// Grade-1 element from a spatial 3-vector (e4 coefficient zero).
    pub fn spatial_vector(signature: Signature, x: [f64; 3]) -> Self {
        Self::vector(signature, [x[0], x[1], x[2], 0.0])
    }

    pub fn from_coeffs(signature: Signature, coeffs: [f64; BLADE_COUNT]) -> Self {
        Self { coeffs, signature }
    }

    pub fn coeffs(&self) -> &[f64; BLADE_COUNT] {
        &self.coeffs
    }

    pub fn coeff(&self, index: usize) -> f64 {
        self.coeffs[index]
    }

    pub fn set_coeff(&mut self, index: usize, value: f64) {
        self.coeffs[index] = value;
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    /// Spatial components of the grade-1 part.
    pub fn vector_part(&self) -> [f64; 3] {
        [self.coeffs[1], self.coeffs[2], self.coeffs[3]]
    }

    fn check_signature(&self, other: &Self) -> Result<(), GaError> {
        if self.signature != other.signature {
            return Err(GaError::SignatureMismatch(self.signature, other.signature));
        }
        Ok(())
    }

    /// Full geometric product `self * other`.
    pub fn geometric_product(&self, other: &Self) -> Result<Self, GaError> {
        self.check_signature(other)?;
        let table = CayleyTable::get(self.signature);
        let mut out = Self::zero(self.signature);
        for i in 0..BLADE_COUNT {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..BLADE_COUNT {
                let b = other.coeffs[j];
                if b == 0.0 {
                    continue;
                }
                let (k, c) = table.product(i, j);
                out.coeffs[k] += c * a * b;
            }
        }
        Ok(out)
    }

    /// Outer (wedge) product: keeps only blade products with no common
    /// factor, i.e. the grade ga+gb part of each blade pair.
    pub fn wedge(&self, other: &Self) -> Result<Self, GaError> {
        self.check_signature(other)?;
        let table = CayleyTable::get(self.signature);
        let mut out = Self::zero(self.signature);
        for i in 0..BLADE_COUNT {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..BLADE_COUNT {
                let b = other.coeffs[j];
                if b == 0.0 {
                    continue;
                }
                if blade_mask(i) & blade_mask(j) != 0 {
                    continue;
                }
                // Disjoint blades never touch the metric, so the wedge is
                // signature-independent: the table entry is just the
                // reordering sign.
                let (k, c) = table.product(i, j);
                out.coeffs[k] += c * a * b;
            }
        }
        Ok(out)
    }

    /// Metric inner product: the grade |ga - gb| part of each blade-pair
    /// product. For grade-1 arguments, `a*b = inner(a,b) + wedge(a,b)`.
    pub fn inner(&self, other: &Self) -> Result<Self, GaError> {
        self.check_signature(other)?;
        let table = CayleyTable::get(self.signature);
        let mut out = Self::zero(self.signature);
        for i in 0..BLADE_COUNT {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..BLADE_COUNT {
                let b = other.coeffs[j];
                if b == 0.0 {
                    continue;
                }
                let (k, c) = table.product(i, j);
                let target = blade_grade(i).abs_diff(blade_grade(j));
                if blade_grade(k) == target {
                    out.coeffs[k] += c * a * b;
                }
            }
        }
        Ok(out)
    }

    /// Reversion: flips the sign of grades 2 and 3 (factor (-1)^{g(g-1)/2}).
    pub fn reverse(&self) -> Self {
        let mut out = *self;
        for (idx, coeff) in out.coeffs.iter_mut().enumerate() {
            let g = blade_grade(idx);
            if g % 4 == 2 || g % 4 == 3 {
                *coeff = -*coeff;
            }
        }
        out
    }

    /// Projection onto one grade. Errors for grades above 4.
    pub fn grade_project(&self, grade: usize) -> Result<Self, GaError> {
        if grade > 4 {
            return Err(GaError::InvalidGrade(grade));
        }
        let mut out = Self::zero(self.signature);
        for idx in 0..BLADE_COUNT {
            if blade_grade(idx) == grade {
                out.coeffs[idx] = self.coeffs[idx];
            }
        }
        Ok(out)
    }

    /// Quadratic form Q(x) = sum_i metric(i) x_i^2 of the grade-1 part.
    /// Under G(3,0,1) this is the squared spatial length.
    pub fn vector_quadratic_form(&self) -> f64 {
        (0..4).map(|axis| self.signature.metric(axis) * self.coeffs[1 + axis].powi(2)).sum()
    }

    /// Largest absolute coefficient difference; convenient in tests.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }
}

impl Add for Multivector {
    type Output = Multivector;
    fn add(self, rhs: Multivector) -> Multivector {
        assert_eq!(self.signature, rhs.signature, "signature mismatch in +");
        let mut out = self;
        for (o, r) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *o += r;
        }
        out
    }
}

impl Sub for Multivector {
    type Output = Multivector;
    fn sub(self, rhs: Multivector) -> Multivector {
        assert_eq!(self.signature, rhs.signature, "signature mismatch in -");
        let mut out = self;
        for (o, r) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *o -= r;
        }
        out
    }
}

impl Neg for Multivector {
    type Output = Multivector;
    fn neg(self) -> Multivector {
        let mut out = self;
        for c in out.coeffs.iter_mut() {
            *c = -*c;
        }
        out
    }
}

impl Mul<f64> for Multivector {
    type Output = Multivector;
    fn mul(self, rhs: f64) -> Multivector {
        let mut out = self;
        for c in out.coeffs.iter_mut() {
            *c *= rhs;
        }
        out
    }
}
