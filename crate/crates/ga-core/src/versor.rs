use crate::{GaError, Multivector, Signature};

/// Tolerance below which a versor's scalar norm counts as singular.
const SINGULAR_NORM_EPS: f64 = 1e-12;
/// Relative residue allowed when validating that V * reverse(V) is scalar.
const VERSOR_RESIDUE_EPS: f64 = 1e-9;

/// Sign convention for reflecting a vector in a hyperplane.
///
/// The workspace default negates the sandwich (`x' = -n x n^{-1}`), which
/// mirrors the full vector through the plane orthogonal to `n`; the plain
/// sandwich (`x' = n x n^{-1}`) instead keeps the component along `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionConvention {
    /// x' = -n x n^{-1} (mirror through the plane orthogonal to n).
    Negated,
    /// x' = n x n^{-1}.
    Plain,
}

/// An invertible interaction operator: a multivector V applied through the
/// sandwich product V x V^{-1}. Rotors (even, from two reflections) and
/// single reflectors (odd, one unit vector) are the common cases;
/// compositions of either stay versors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Versor {
    mv: Multivector,
    normalized: bool,
}

impl Versor {
    /// The identity operator (scalar 1).
    pub fn identity(signature: Signature) -> Self {
        Self { mv: Multivector::scalar(signature, 1.0), normalized: true }
    }

    /// Builds a rotor R = cos(theta/2) - sin(theta/2) * B_hat from the
    /// grade-2 part of `plane`. The plane must have positive squared norm
    /// (spatial rotation planes do; degenerate planes like e14 under
    /// G(3,0,1) are rejected).
    pub fn rotor(plane: &Multivector, angle: f64) -> Result<Self, GaError> {
        let b = plane.grade_project(2)?;
        let norm_sq = b.geometric_product(&b.reverse())?.scalar_part();
        if norm_sq <= SINGULAR_NORM_EPS {
            return Err(GaError::DegenerateOperand("rotor plane has non-positive norm"));
        }
        let b_hat = b * (1.0 / norm_sq.sqrt());
        let half = 0.5 * angle;
        let mv = Multivector::scalar(plane.signature(), half.cos()) - b_hat * half.sin();
        Ok(Self { mv, normalized: true })
    }

    /// Rotor for a right-handed rotation about a spatial axis. The axis
    /// (n1, n2, n3) corresponds to the plane n1 e23 - n2 e13 + n3 e12.
    pub fn rotor_about_axis(
        signature: Signature,
        axis: [f64; 3],
        angle: f64,
    ) -> Result<Self, GaError> {
        let mut plane = Multivector::zero(signature);
        plane.set_coeff(crate::mask_to_index(0b0110), axis[0]); // e23
        plane.set_coeff(crate::mask_to_index(0b0101), -axis[1]); // e13
        plane.set_coeff(crate::mask_to_index(0b0011), axis[2]); // e12
        Self::rotor(&plane, angle)
    }

    /// Builds a unit reflector from the grade-1 part of `normal`.
    pub fn reflector(normal: &Multivector) -> Result<Self, GaError> {
        let n = normal.grade_project(1)?;
        let norm_sq = n.geometric_product(&n.reverse())?.scalar_part();
        if norm_sq.abs() <= SINGULAR_NORM_EPS {
            return Err(GaError::DegenerateOperand("reflector normal has zero norm"));
        }
        let mv = n * (1.0 / norm_sq.abs().sqrt());
        Ok(Self { mv, normalized: true })
    }

    /// Wraps a general multivector, validating that it acts as a versor:
    /// V * reverse(V) must be a nonzero scalar (up to a small residue).
    pub fn from_multivector(mv: Multivector) -> Result<Self, GaError> {
        let vv = mv.geometric_product(&mv.reverse())?;
        let scalar = vv.scalar_part();
        if scalar.abs() <= SINGULAR_NORM_EPS {
            return Err(GaError::SingularVersor);
        }
        let residue = (vv - Multivector::scalar(mv.signature(), scalar)).max_abs();
        if residue > VERSOR_RESIDUE_EPS * scalar.abs().max(1.0) {
            return Err(GaError::DegenerateOperand("V * reverse(V) is not scalar"));
        }
        let normalized = (scalar.abs() - 1.0).abs() <= 1e-10;
        Ok(Self { mv, normalized })
    }

    pub fn multivector(&self) -> &Multivector {
        &self.mv
    }

    pub fn signature(&self) -> Signature {
        self.mv.signature()
    }

    /// Whether |<V reverse(V)>_0| was 1 when the versor was built.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Scalar norm <V reverse(V)>_0 (sign preserved).
    pub fn scalar_norm(&self) -> Result<f64, GaError> {
        Ok(self.mv.geometric_product(&self.mv.reverse())?.scalar_part())
    }

    /// Rescales so that |<V reverse(V)>_0| = 1.
    pub fn normalize(&self) -> Result<Self, GaError> {
        let s = self.scalar_norm()?;
        if s.abs() <= SINGULAR_NORM_EPS {
            return Err(GaError::SingularVersor);
        }
        Ok(Self { mv: self.mv * (1.0 / s.abs().sqrt()), normalized: true })
    }

    /// V^{-1} = reverse(V) / <V reverse(V)>_0.
    pub fn inverse(&self) -> Result<Multivector, GaError> {
        let s = self.scalar_norm()?;
        if s.abs() <= SINGULAR_NORM_EPS {
            return Err(GaError::SingularVersor);
        }
        Ok(self.mv.reverse() * (1.0 / s))
    }

    /// Sandwich product V x V^{-1}.
    pub fn sandwich(&self, x: &Multivector) -> Result<Multivector, GaError> {
        if x.signature() != self.signature() {
            return Err(GaError::SignatureMismatch(self.signature(), x.signature()));
        }
        let inv = self.inverse()?;
        self.mv.geometric_product(x)?.geometric_product(&inv)
    }
}

/// Composes interaction operators into a single versor, multiplying left to
/// right, so `compose([a, b])` sandwiches like `a.sandwich(b.sandwich(x))`.
pub fn compose(operators: &[Versor]) -> Result<Versor, GaError> {
    let Some(first) = operators.first() else {
        return Err(GaError::EmptyComposition);
    };
    let mut mv = *first.multivector();
    let mut normalized = first.normalized;
    for op in &operators[1..] {
        mv = mv.geometric_product(op.multivector())?;
        normalized &= op.normalized;
    }
    Ok(Versor { mv, normalized })
}

/// Reflects the grade-1 element `x` in the hyperplane orthogonal to the
/// reflector's vector, using the workspace default sign (`x' = -n x n^{-1}`).
pub fn reflect_vector(normal: &Versor, x: &Multivector) -> Result<Multivector, GaError> {
    reflect_vector_with(normal, x, ReflectionConvention::Negated)
}

/// Reflection with an explicit sign convention.
pub fn reflect_vector_with(
    normal: &Versor,
    x: &Multivector,
    convention: ReflectionConvention,
) -> Result<Multivector, GaError> {
    let sandwiched = normal.sandwich(x)?;
    Ok(match convention {
        ReflectionConvention::Negated => -sandwiched,
        ReflectionConvention::Plain => sandwiched,
    })
}
