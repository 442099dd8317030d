//! Training machinery: the map-matching loss with its SSIM term, an
//! Adam-style optimizer, the end-to-end optimization loop, and the
//! image-source ray oracle that manufactures ground-truth measurements
//! for synthetic scenes.
//!
//! The training pipeline records one tape per step: scene attributes and
//! network parameters enter as leaves, flow through the tokenizer, the
//! conditioning networks, residual application, and the splatting
//! operation, and meet the measured map in [`loss_on_tape`]. One reverse
//! sweep then prices every parameter — Gaussian attributes included — and
//! the optimizer walks them all.

mod adam;
mod loss;
mod measurement;
mod model;
mod pipeline;
mod ssim;
mod synth;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use loss::{dynamic_range, loss, loss_on_tape, LossConfig};
pub use measurement::{MeasurementRecord, Observation, RxPose};
pub use model::Model;
pub use pipeline::{record_pipeline, render_with_model, PipelineLeaves, RenderSetup};
pub use ssim::{gaussian_window, ssim, ssim_on_tape, SsimConfig};
pub use synth::{enumerate_paths, synth_generate, RayPath, Reflector, SyntheticSceneSpec};
pub use train::{
    evaluate, jitter_signals, train, EvalReport, RssiPooling, TrainConfig, TrainReport,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrainerError {
    /// A configuration field is outside its valid range.
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    /// Paired grids or lists disagree in size.
    #[error("{what}: expected {expected}, got {got}")]
    SizeMismatch { what: &'static str, expected: usize, got: usize },
    /// Loss and metrics need at least one measurement.
    #[error("measurement batch is empty")]
    EmptyBatch,
    /// Training needs at least one usable record.
    #[error("dataset contains no valid spectrum measurements")]
    EmptyDataset,
    /// A synthetic scene specification violates its preconditions.
    #[error("invalid synthetic scene spec: {0}")]
    InvalidSpec(&'static str),
    /// A receiver pose makes the ray geometry ill-defined.
    #[error("degenerate geometry at pose {pose}: {detail}")]
    DegenerateGeometry { pose: usize, detail: &'static str },
    /// Image-source reflection and the algebraic sandwich disagreed,
    /// which indicates a bug rather than bad input.
    #[error("reflection oracle disagreement at pose {pose}: |difference| = {error}")]
    OracleDisagreement { pose: usize, error: f64 },
    /// The loss left the reals; training state was dumped to the run log.
    #[error("training diverged at step {step} (last finite loss {last_finite})")]
    Diverged { step: usize, last_finite: f64 },
    /// Writing a run-log line failed.
    #[error("failed to write run log: {0}")]
    Log(String),
    #[error("scene error: {0}")]
    Scene(#[from] scene::SceneError),
    #[error("tokenizer error: {0}")]
    Tokenizer(#[from] tokenizer::TokenizerError),
    #[error("mapping error: {0}")]
    Mapping(#[from] mapping_net::MappingError),
    #[error("render error: {0}")]
    Render(#[from] renderer::RenderError),
    #[error("signal error: {0}")]
    Signal(#[from] signal_model::SignalError),
    #[error("autodiff error: {0}")]
    Autodiff(#[from] autodiff::AdError),
}
