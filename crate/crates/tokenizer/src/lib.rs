//! Equivariant scene tokenizer.
//!
//! Anchor primitives become multivector tokens (position on the spatial
//! grade-1 blades, opacity and role flags in an auxiliary scalar stream),
//! joined by a transmitter token and a learned CLS token. A stack of
//! attention blocks mixes them with grade-respecting linear maps, attention
//! logits built from the invariant inner product, geometric-product feature
//! pairing, and a scalar-conditioned grade gate — every piece commutes with
//! spatial rotations of the input, so the encoding of a rotated scene is the
//! rotation of the encoding.
//!
//! The CLS token's readout (its scalar and e4 coefficients plus the
//! auxiliary scalars) is rotation-invariant by construction and is the
//! global conditioning feature handed to the mapping network, alongside
//! sinusoidal Euclidean embeddings of the queried position and the
//! transmitter.

mod attention;
mod config;
mod embed;
mod encode;
mod params;
mod tokens;

pub use attention::{encoder_block, ga_attention};
pub use config::{
    TokenizerConfig, AUX_FLAG_ANCHOR, AUX_FLAG_CLS, AUX_FLAG_TX, AUX_OPACITY, BLADE_BLOCKS,
    BLOCK_OF_COEFF, INVARIANT_BLADES,
};
pub use embed::{embed_euclidean, embed_euclidean_on_tape};
pub use encode::{encode, encode_on_tape, EncodedScene, MultiViewOutput};
pub use params::{BlockParams, BlockVars, TokenizerParams, TokenizerVars};
pub use tokens::{tokenize_anchors, TokenVar};

/// Everything that can go wrong while building or running the tokenizer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TokenizerError {
    /// Configuration violates a structural requirement.
    #[error("invalid tokenizer configuration: {0}")]
    InvalidConfig(&'static str),
    /// Tokenization was asked to run with no anchors at all.
    #[error("anchor set is empty")]
    EmptyAnchorSet,
    /// Two inputs that must agree in length do not.
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    /// An anchor index points past the end of the primitive list.
    #[error("anchor index {index} out of range for {count} primitives")]
    AnchorOutOfRange { index: usize, count: usize },
}
