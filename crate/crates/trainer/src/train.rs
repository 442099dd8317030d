//! The optimization loop: per measurement, re-encode the scene, apply the
//! predicted residuals, render at the recorded pose, and step every
//! parameter tensor with Adam. Also hosts the held-out evaluation pass.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use autodiff::Tape;
use renderer::rssi_from_map;
use scene::{Scene, SceneError, SIGNAL_DIM};
use signal_model::{AZIMUTH_BINS, ELEVATION_BINS};

use crate::adam::{AdamConfig, AdamState};
use crate::loss::{dynamic_range, LossConfig};
use crate::measurement::{MeasurementRecord, Observation};
use crate::model::Model;
use crate::pipeline::{flatten_scene, record_pipeline, render_with_model, RenderSetup};
use crate::ssim::ssim;
use crate::TrainerError;

/// Knobs for the optimization loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Full passes over the measurement set.
    pub epochs: usize,
    /// Seed for the shuffle order; fixing it fixes the whole trajectory.
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1, seed: 0, optimizer: AdamConfig::default(), loss: LossConfig::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        self.optimizer.validate()?;
        self.loss.validate()
    }
}

/// Soft-max pooling knobs used when collapsing a rendered map into a
/// single power reading for RSSI comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiPooling {
    /// Sharpness of the peak-weighted pooling; lower is peakier.
    pub temperature: f64,
    /// Blend toward a plain mean, in [0, 1].
    pub uniform_mix: f64,
    /// Reference power for the dB conversion.
    pub reference_power: f64,
}

impl Default for RssiPooling {
    fn default() -> Self {
        Self { temperature: 0.1, uniform_mix: 0.05, reference_power: 1.0 }
    }
}

impl RssiPooling {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(TrainerError::InvalidConfig("pooling temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.uniform_mix) {
            return Err(TrainerError::InvalidConfig("pooling uniform mix must lie in [0, 1]"));
        }
        if !(self.reference_power > 0.0 && self.reference_power.is_finite()) {
            return Err(TrainerError::InvalidConfig("pooling reference power must be positive"));
        }
        Ok(())
    }
}

/// Loss trace handed back by [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at every optimization step, in execution order.
    pub step_losses: Vec<f64>,
    /// Mean loss over each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Held-out metrics from [`evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_ssim: f64,
    pub rssi_mae_db: f64,
    pub per_pose_ssim: Vec<f64>,
    pub per_pose_rssi_error_db: Vec<f64>,
}

/// Spreads a small random signal over primitives whose signal vector is
/// exactly zero, so their emitted magnitude starts away from the kink at
/// the origin. Primitives that already carry signal are left alone, which
/// makes a second call a no-op.
pub fn jitter_signals<R: Rng>(scene: &mut Scene, amplitude: f64, rng: &mut R) {
    for primitive in scene.primitives.iter_mut() {
        if primitive.signal.iter().all(|&s| s == 0.0) {
            primitive.signal[0] = amplitude * rng.gen_range(0.5..1.0);
            for s in primitive.signal.iter_mut().skip(1) {
                *s = amplitude * rng.gen_range(-0.1..0.1);
            }
        }
    }
}

/// One usable training sample: a receiver position and the ground-truth
/// radiance map already laid out in the plane's pixel order.
struct Sample {
    position: [f64; 3],
    pixels: Vec<f64>,
}

/// Pulls the valid spectrum measurements out of a record list and reshapes
/// them onto `plane`. Records that are flagged invalid or carry only a
/// scalar power reading are skipped without validation.
fn collect_samples(
    records: &[MeasurementRecord],
    setup: &RenderSetup,
) -> Result<Vec<Sample>, TrainerError> {
    let mut samples = Vec::new();
    for record in records {
        if !record.valid {
            continue;
        }
        if let Observation::Spectrum(spectrum) = &record.observation {
            record.validate()?;
            samples.push(Sample {
                position: record.pose.position,
                pixels: setup.plane.spectrum_to_pixels(spectrum),
            });
        }
    }
    if samples.is_empty() {
        return Err(TrainerError::EmptyDataset);
    }
    Ok(samples)
}

/// Spectrum measurements only make sense on the full angular grid.
fn require_spectrum_plane(setup: &RenderSetup) -> Result<(), TrainerError> {
    if setup.plane.width() != AZIMUTH_BINS || setup.plane.height() != ELEVATION_BINS {
        return Err(TrainerError::InvalidConfig(
            "training against spectra requires the full 360x90 plane",
        ));
    }
    Ok(())
}

/// The renderer treats a primitive sitting on the receiver as corrupt
/// input; catch it here first so a drifting scene surfaces as an error
/// rather than a panic inside the render op.
fn check_primitive_depths(
    scene: &Scene,
    position: [f64; 3],
    sample: usize,
    min_depth: f64,
) -> Result<(), TrainerError> {
    for primitive in &scene.primitives {
        let d = [
            primitive.position[0] - position[0],
            primitive.position[1] - position[1],
            primitive.position[2] - position[2],
        ];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if r < min_depth {
            return Err(TrainerError::DegenerateGeometry {
                pose: sample,
                detail: "a primitive drifted onto the receiver",
            });
        }
    }
    Ok(())
}

fn log_line(log: &mut Option<&mut dyn Write>, line: serde_json::Value) -> Result<(), TrainerError> {
    if let Some(w) = log.as_mut() {
        writeln!(w, "{line}").map_err(|e| TrainerError::Log(e.to_string()))?;
    }
    Ok(())
}

/// Lengths of every trainable tensor, in the same order the pipeline
/// exposes its leaves: tokenizer, mapping net, then the five scene arrays.
fn parameter_shapes(model: &mut Model, primitives: usize) -> Vec<usize> {
    let mut shapes: Vec<usize> =
        model.tokenizer.tensors_mut().into_iter().map(|(_, t)| t.len()).collect();
    shapes.extend(model.mapping.tensors_mut().into_iter().map(|t| t.len()));
    shapes.extend([3 * primitives, 4 * primitives, 3 * primitives, primitives, SIGNAL_DIM * primitives]);
    shapes
}

/// One Adam step over every tensor, then write the scene arrays back into
/// the primitives with the usual storage constraints re-imposed: unit
/// rotations and opacities clamped to [0, 1].
fn apply_update(
    model: &mut Model,
    scene: &mut Scene,
    state: &mut AdamState,
    config: &AdamConfig,
    grads: &[Vec<f64>],
) -> Result<(), TrainerError> {
    let [mut positions, mut rotations, mut log_scales, mut opacities, mut signals] =
        flatten_scene(scene);
    {
        let mut params: Vec<&mut Vec<f64>> = Vec::new();
        for (_, tensor) in model.tokenizer.tensors_mut() {
            params.push(tensor);
        }
        params.extend(model.mapping.tensors_mut());
        params.push(&mut positions);
        params.push(&mut rotations);
        params.push(&mut log_scales);
        params.push(&mut opacities);
        params.push(&mut signals);
        state.apply(config, &mut params, grads)?;
    }
    for (i, primitive) in scene.primitives.iter_mut().enumerate() {
        primitive.position = [positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]];
        let mut q = [
            rotations[4 * i],
            rotations[4 * i + 1],
            rotations[4 * i + 2],
            rotations[4 * i + 3],
        ];
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(TrainerError::Scene(SceneError::DegenerateRotation(i)));
        }
        for c in q.iter_mut() {
            *c /= norm;
        }
        primitive.rotation = q;
        primitive.log_scale = [log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]];
        primitive.opacity = opacities[i].clamp(0.0, 1.0);
        primitive.signal.copy_from_slice(&signals[SIGNAL_DIM * i..SIGNAL_DIM * (i + 1)]);
    }
    Ok(())
}

/// Runs the optimization loop over the valid spectrum measurements in
/// `records`, updating `model` and `scene` in place.
///
/// Each step rebuilds the full differentiable pipeline for one measurement
/// — encode, predict residuals, composite at the recorded pose, score —
/// then backpropagates and applies one Adam update to every tensor,
/// including the raw Gaussian attributes. The sample order is reshuffled
/// each epoch from `config.seed`, so the whole trajectory is a pure
/// function of the inputs. A non-finite loss aborts with
/// [`TrainerError::Diverged`] after dumping a diagnostic line to the run
/// log. `log`, when given, receives JSON-lines progress events.
pub fn train(
    model: &mut Model,
    scene: &mut Scene,
    records: &[MeasurementRecord],
    setup: &RenderSetup,
    config: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainReport, TrainerError> {
    config.validate()?;
    model.validate()?;
    require_spectrum_plane(setup)?;
    if scene.primitives.is_empty() {
        return Err(TrainerError::InvalidConfig("scene contains no primitives"));
    }
    if scene.anchor_count == 0 {
        return Err(TrainerError::InvalidConfig("scene anchor count must be positive"));
    }
    let samples = collect_samples(records, setup)?;

    let mut state = AdamState::new(&parameter_shapes(model, scene.primitives.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut step_losses: Vec<f64> = Vec::new();
    let mut epoch_losses: Vec<f64> = Vec::new();

    log_line(
        &mut log,
        serde_json::json!({
            "event": "start",
            "seed": config.seed,
            "epochs": config.epochs,
            "optimizer": config.optimizer,
            "loss": config.loss,
            "primitives": scene.primitives.len(),
            "samples": samples.len(),
        }),
    )?;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;

        for &sample_idx in &order {
            let step = step_losses.len();
            let sample = &samples[sample_idx];
            check_primitive_depths(scene, sample.position, sample_idx, setup.render.min_depth)?;
            let anchors =
                scene.select_anchors(scene.anchor_count.min(scene.primitives.len()))?;
            let range = dynamic_range(std::slice::from_ref(&sample.pixels));

            let mut tape = Tape::new();
            let (leaves, loss_var) = record_pipeline(
                &mut tape,
                model,
                scene,
                &anchors,
                &[sample.position],
                &[sample.pixels.clone()],
                setup,
                &config.loss,
                range,
            )?;
            let loss_value = tape.value(loss_var)[0];
            if !loss_value.is_finite() {
                let last_finite = step_losses.last().copied().unwrap_or(f64::NAN);
                log_line(
                    &mut log,
                    serde_json::json!({
                        "event": "diverged",
                        "step": step,
                        "epoch": epoch,
                        "sample": sample_idx,
                        "loss": loss_value.to_string(),
                        "last_finite": last_finite.to_string(),
                        "pose": sample.position,
                    }),
                )?;
                return Err(TrainerError::Diverged { step, last_finite });
            }

            let grads = tape.backward(loss_var)?;
            let grad_tensors: Vec<Vec<f64>> =
                leaves.leaf_list().iter().map(|&v| grads.get(v)).collect();
            apply_update(model, scene, &mut state, &config.optimizer, &grad_tensors)?;

            step_losses.push(loss_value);
            epoch_sum += loss_value;
            log_line(
                &mut log,
                serde_json::json!({
                    "event": "step",
                    "step": step,
                    "epoch": epoch,
                    "sample": sample_idx,
                    "loss": loss_value,
                    "dynamic_range": range,
                }),
            )?;
        }

        let epoch_mean = epoch_sum / samples.len() as f64;
        epoch_losses.push(epoch_mean);
        log_line(
            &mut log,
            serde_json::json!({ "event": "epoch", "epoch": epoch, "mean_loss": epoch_mean }),
        )?;
    }

    Ok(TrainReport { step_losses, epoch_losses })
}

/// Scores the model on the valid spectrum measurements in `records`
/// without touching any parameter: per pose, render, compare maps by SSIM,
/// and compare pooled power readings in dB. The SSIM dynamic range is
/// taken over the whole evaluation set.
pub fn evaluate(
    model: &Model,
    scene: &Scene,
    records: &[MeasurementRecord],
    setup: &RenderSetup,
    loss: &LossConfig,
    pooling: &RssiPooling,
) -> Result<EvalReport, TrainerError> {
    loss.validate()?;
    pooling.validate()?;
    model.validate()?;
    require_spectrum_plane(setup)?;
    let samples = collect_samples(records, setup)?;

    let gts: Vec<&[f64]> = samples.iter().map(|s| s.pixels.as_slice()).collect();
    let range = dynamic_range(&gts);
    let height = setup.plane.height();
    let width = setup.plane.width();

    let mut per_pose_ssim = Vec::with_capacity(samples.len());
    let mut per_pose_rssi_error_db = Vec::with_capacity(samples.len());
    for sample in &samples {
        let pred = render_with_model(model, scene, sample.position, setup)?;
        per_pose_ssim.push(ssim(&pred, &sample.pixels, height, width, range, &loss.ssim)?);
        let pred_db =
            rssi_from_map(&pred, pooling.temperature, pooling.uniform_mix, pooling.reference_power);
        let gt_db = rssi_from_map(
            &sample.pixels,
            pooling.temperature,
            pooling.uniform_mix,
            pooling.reference_power,
        );
        per_pose_rssi_error_db.push((pred_db - gt_db).abs());
    }

    let n = samples.len() as f64;
    Ok(EvalReport {
        mean_ssim: per_pose_ssim.iter().sum::<f64>() / n,
        rssi_mae_db: per_pose_rssi_error_db.iter().sum::<f64>() / n,
        per_pose_ssim,
        per_pose_rssi_error_db,
    })
}
