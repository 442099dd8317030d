//! Geometric algebra over a four-dimensional real vector space.
//!
//! The algebra G(p, q, r) is fixed at dimension p + q + r = 4 with a
//! runtime-selectable metric: `p` basis vectors square to +1, `q` to -1 and
//! `r` to 0. The two signatures used by the rest of the workspace are
//! G(3,0,1) (Euclidean space plus one degenerate direction) and G(3,1,0)
//! (Minkowski). A multivector carries all 16 blade coefficients; products
//! are driven by a per-signature Cayley table so that every operation is
//! a plain table-indexed loop.

mod blade;
mod multivector;
mod signature;
mod versor;

pub use blade::{
    blade_contains_e4, blade_grade, blade_mask, blade_name, mask_to_index, BLADE_COUNT,
    NONDEGENERATE_BLADES,
};
pub use multivector::{CayleyTable, Multivector};
pub use signature::Signature;
pub use versor::{compose, reflect_vector, reflect_vector_with, ReflectionConvention, Versor};

use thiserror::Error;

/// Errors surfaced by algebra operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaError {
    /// Operands were built over different signatures.
    #[error("signature mismatch: {0} vs {1}")]
    SignatureMismatch(Signature, Signature),
    /// p + q + r must equal 4.
    #[error("invalid signature ({p},{q},{r}): p+q+r must be 4")]
    InvalidSignature { p: u8, q: u8, r: u8 },
    /// Grade outside 0..=4.
    #[error("invalid grade {0}: must be in 0..=4")]
    InvalidGrade(usize),
    /// Versor with vanishing non-degenerate norm cannot be inverted.
    #[error("singular versor: non-degenerate norm is zero")]
    SingularVersor,
    /// `compose` needs at least one operator.
    #[error("empty composition list")]
    EmptyComposition,
    /// A constructor was handed a multivector that cannot act as requested
    /// (e.g. a rotor plane with zero non-degenerate norm).
    #[error("degenerate operand: {0}")]
    DegenerateOperand(&'static str),
}
