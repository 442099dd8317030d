//! Conditioning networks that turn scene and transmitter embeddings into
//! per-primitive field values and residual corrections.
//!
//! Two trunks share the work. The attenuation branch reads the transmitter
//! embedding, a position embedding, and the scene feature, and produces a
//! per-position attenuation in (0, 1] together with a geometric feature
//! vector. The signal branch reads that feature alongside the same
//! embeddings and emits a spherical-harmonic-shaped signal representation.
//! Four small heads then turn the pair into residual corrections for a
//! Gaussian scene: rotation, scaling, signal, and an opacity offset that
//! depends on the geometric feature alone.
//!
//! Everything runs on the [`autodiff`] tape, so the exact arithmetic used
//! at inference is also the arithmetic that training differentiates. The
//! plain `*_forward` entry points spin up a throwaway tape internally.

mod forward;
mod mlp;
mod params;

pub use forward::{
    attenuation_forward, attenuation_on_tape, fields_forward, gradients, heads_forward,
    heads_on_tape, signal_forward, signal_on_tape, FieldOutputs, HeadVars,
};
pub use mlp::{mlp_on_tape, DenseLayer, MlpParams, MlpVars};
pub use params::{MappingConfig, MappingParams, MappingVars};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    /// A configuration field is outside its valid range.
    #[error("invalid mapping configuration: {0}")]
    InvalidConfig(&'static str),
    /// An input or parameter tensor has the wrong size.
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    /// The tape rejected a gradient request.
    #[error("autodiff failure: {0}")]
    Autodiff(#[from] autodiff::AdError),
}
