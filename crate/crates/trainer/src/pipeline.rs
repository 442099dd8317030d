//! The end-to-end differentiable pipeline for one training step.
//!
//! [`record_pipeline`] lays the whole forward pass onto a single tape:
//! scene attributes and network parameters enter as leaves, the tokenizer
//! summarizes the scene, the conditioning networks emit per-primitive
//! attenuations and residual corrections, effective primitives are
//! assembled on-tape, splatted once per receiver pose, and compared to the
//! measured maps. One backward sweep then yields gradients for every leaf.
//! [`render_with_model`] is the tape-free twin used for evaluation.

use crate::loss::{loss_on_tape, LossConfig};
use crate::model::Model;
use crate::TrainerError;
use autodiff::{Tape, Var};
use mapping_net::{
    attenuation_on_tape, fields_forward, heads_on_tape, signal_on_tape, MappingVars,
};
use renderer::{render_map, MercatorConfig, PerceptionPlane, RenderConfig, RenderOp};
use scene::{Scene, SIGNAL_DIM};
use tokenizer::{embed_euclidean_on_tape, encode_on_tape, TokenizerVars};

/// Learned attenuation factors are floored here before they reach the
/// splatter. The sigmoid that produces them is positive in exact
/// arithmetic, but in floating point it underflows to zero for large
/// negative logits, and the splatter treats zero as invalid.
pub(crate) const DELTA_FLOOR: f64 = 1e-12;

pub(crate) fn clamp_delta(delta: f64) -> f64 {
    delta.clamp(DELTA_FLOOR, 1.0)
}

/// Where renders happen: the perception plane, the projection that fills
/// it, and the splatter's numeric knobs. Receivers are world-aligned; a
/// pose contributes only its position.
#[derive(Debug, Clone)]
pub struct RenderSetup {
    pub plane: PerceptionPlane,
    pub mercator: MercatorConfig,
    pub render: RenderConfig,
}

impl RenderSetup {
    /// Chart covering the full angular-spectrum grid, with the projection
    /// opened wide enough to keep every elevation bin on the plane.
    pub fn spectrum_chart() -> Result<Self, TrainerError> {
        let mercator = MercatorConfig::with_latitude_max(89.5)?;
        let plane = PerceptionPlane::spectrum_grid(&mercator)?;
        Ok(Self { plane, mercator, render: RenderConfig::default() })
    }
}

/// Every leaf the recorded pipeline exposes to the optimizer, in the fixed
/// order [`Self::leaf_list`] reports: tokenizer tensors, mapping tensors,
/// then the five flattened scene attribute arrays.
pub struct PipelineLeaves {
    pub tokenizer: TokenizerVars,
    pub mapping: MappingVars,
    pub positions: Var,
    pub rotations: Var,
    pub log_scales: Var,
    pub opacities: Var,
    pub signals: Var,
}

impl PipelineLeaves {
    pub fn leaf_list(&self) -> Vec<Var> {
        let mut leaves = self.tokenizer.leaf_list();
        leaves.extend(self.mapping.leaf_list());
        leaves.extend([
            self.positions,
            self.rotations,
            self.log_scales,
            self.opacities,
            self.signals,
        ]);
        leaves
    }
}

/// Scene attributes flattened into the five structure-of-arrays tensors
/// the pipeline trains: positions (3N), rotations (4N), log scales (3N),
/// opacities (N), signal coefficients (18N).
pub(crate) fn flatten_scene(scene: &Scene) -> [Vec<f64>; 5] {
    let n = scene.len();
    let mut positions = Vec::with_capacity(3 * n);
    let mut rotations = Vec::with_capacity(4 * n);
    let mut log_scales = Vec::with_capacity(3 * n);
    let mut opacities = Vec::with_capacity(n);
    let mut signals = Vec::with_capacity(SIGNAL_DIM * n);
    for prim in &scene.primitives {
        positions.extend_from_slice(&prim.position);
        rotations.extend_from_slice(&prim.rotation);
        log_scales.extend_from_slice(&prim.log_scale);
        opacities.push(prim.opacity);
        signals.extend_from_slice(&prim.signal);
    }
    [positions, rotations, log_scales, opacities, signals]
}

/// Records the full forward pass for a batch of poses and returns the
/// loss variable plus the leaves a backward sweep prices. Anchors are
/// chosen by the caller and stay fixed for the step, so the recorded
/// function is smooth in every leaf.
#[allow(clippy::too_many_arguments)]
pub fn record_pipeline(
    tape: &mut Tape,
    model: &Model,
    scene: &Scene,
    anchors: &[usize],
    poses: &[[f64; 3]],
    gt_maps: &[Vec<f64>],
    setup: &RenderSetup,
    loss_config: &LossConfig,
    dynamic_range: f64,
) -> Result<(PipelineLeaves, Var), TrainerError> {
    model.validate()?;
    loss_config.validate().map_err(|_| {
        TrainerError::InvalidConfig("loss configuration is invalid")
    })?;
    let n = scene.len();
    if n == 0 {
        return Err(TrainerError::InvalidConfig("scene has no primitives"));
    }
    if anchors.is_empty() || anchors.iter().any(|&a| a >= n) {
        return Err(TrainerError::InvalidConfig(
            "anchor indices must be non-empty and within the scene",
        ));
    }
    if poses.len() != gt_maps.len() {
        return Err(TrainerError::SizeMismatch {
            what: "poses vs measured maps",
            expected: poses.len(),
            got: gt_maps.len(),
        });
    }

    let [positions, rotations, log_scales, opacities, signals] = flatten_scene(scene);
    let leaves = PipelineLeaves {
        tokenizer: TokenizerVars::leaves(tape, &model.tokenizer),
        mapping: MappingVars::leaves(tape, &model.mapping),
        positions: tape.leaf(positions),
        rotations: tape.leaf(rotations),
        log_scales: tape.leaf(log_scales),
        opacities: tape.leaf(opacities),
        signals: tape.leaf(signals),
    };

    // Scene summary and conditioning features.
    let tx = tape.constant(scene.tx_position.to_vec());
    let encoded = encode_on_tape(
        tape,
        &leaves.tokenizer,
        &model.tokenizer_config,
        leaves.positions,
        leaves.opacities,
        anchors,
        tx,
    )?;
    let cls = encoded.cls_feature;
    let frequencies = model.tokenizer_config.frequencies;
    let embed_scale = model.tokenizer_config.embed_scale;
    let e_tx = embed_euclidean_on_tape(tape, tx, frequencies, embed_scale);

    // Per-primitive fields and effective attributes.
    let mut q_parts = Vec::with_capacity(n);
    let mut scale_parts = Vec::with_capacity(n);
    let mut opacity_parts = Vec::with_capacity(n);
    let mut signal_parts = Vec::with_capacity(n);
    let mut delta_parts = Vec::with_capacity(n);
    let mut attn_parts = Vec::with_capacity(n);
    for i in 0..n {
        let p = tape.slice(leaves.positions, 3 * i, 3);
        let e_x = embed_euclidean_on_tape(tape, p, frequencies, embed_scale);
        let (delta, f) = attenuation_on_tape(
            tape,
            &leaves.mapping,
            &model.mapping,
            &model.mapping_config,
            e_tx,
            e_x,
            cls,
        )?;
        let xi = signal_on_tape(
            tape,
            &leaves.mapping,
            &model.mapping,
            &model.mapping_config,
            f,
            e_tx,
            e_x,
            cls,
        )?;
        let heads = heads_on_tape(
            tape,
            &leaves.mapping,
            &model.mapping,
            &model.mapping_config,
            f,
            xi,
        )?;

        let q_raw = tape.slice(leaves.rotations, 4 * i, 4);
        let q_shifted = tape.add(q_raw, heads.d_rotation);
        q_parts.push(tape.normalize(q_shifted));

        let ls_raw = tape.slice(leaves.log_scales, 3 * i, 3);
        scale_parts.push(tape.add(ls_raw, heads.d_scaling));

        let opacity_raw = tape.slice(leaves.opacities, i, 1);
        let opacity_shifted = tape.add(opacity_raw, heads.d_attn);
        opacity_parts.push(tape.clamp(opacity_shifted, 0.0, 1.0));

        let signal_raw = tape.slice(leaves.signals, SIGNAL_DIM * i, SIGNAL_DIM);
        signal_parts.push(tape.add(signal_raw, heads.d_signal));

        delta_parts.push(tape.clamp(delta, DELTA_FLOOR, 1.0));
        attn_parts.push(heads.d_attn);
    }
    let q_all = tape.concat(&q_parts);
    let scales_all = tape.concat(&scale_parts);
    let opacities_all = tape.concat(&opacity_parts);
    let signals_all = tape.concat(&signal_parts);
    let deltas_all = tape.concat(&delta_parts);
    let d_attn_all = tape.concat(&attn_parts);

    // One splat per pose, then the batch loss.
    let mut preds = Vec::with_capacity(poses.len());
    let mut gts = Vec::with_capacity(gt_maps.len());
    for (pose, gt) in poses.iter().zip(gt_maps) {
        let op = RenderOp {
            rx_position: *pose,
            plane: setup.plane.clone(),
            mercator: setup.mercator,
            config: setup.render,
        };
        preds.push(tape.custom(
            Box::new(op),
            &[
                leaves.positions,
                q_all,
                scales_all,
                opacities_all,
                signals_all,
                deltas_all,
            ],
        ));
        gts.push(tape.constant(gt.clone()));
    }
    let loss = loss_on_tape(
        tape,
        &preds,
        &gts,
        d_attn_all,
        setup.plane.height(),
        setup.plane.width(),
        dynamic_range,
        loss_config,
    )?;
    Ok((leaves, loss))
}

/// Tape-free forward pass: encode, condition, apply residuals, splat.
/// Computes exactly what the recorded pipeline computes for one pose.
pub fn render_with_model(
    model: &Model,
    scene: &Scene,
    rx_position: [f64; 3],
    setup: &RenderSetup,
) -> Result<Vec<f64>, TrainerError> {
    model.validate()?;
    let features =
        tokenizer::encode(&model.tokenizer, &model.tokenizer_config, scene, scene.tx_position)?;
    let outputs = fields_forward(
        &model.mapping,
        &model.mapping_config,
        &features.e_tx,
        &features.e_x,
        &features.cls,
    )?;
    let effective = scene.apply_residuals(&outputs.residuals)?;
    let deltas: Vec<f64> = outputs.delta.iter().map(|&d| clamp_delta(d)).collect();
    Ok(render_map(
        &effective,
        &deltas,
        rx_position,
        &setup.plane,
        &setup.mercator,
        &setup.render,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mapping_net::MappingConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use scene::InitConfig;
    use tokenizer::TokenizerConfig;

    fn small_model(rng: &mut ChaCha8Rng) -> Model {
        let tokenizer_config = TokenizerConfig {
            mv_channels: 4,
            aux_scalars: 4,
            blocks: 1,
            frequencies: 2,
            embed_scale: 10.0,
        };
        let mapping_config = MappingConfig {
            embed_dim: tokenizer_config.embed_dim(),
            cls_dim: tokenizer_config.cls_feature_dim(),
            hidden: 16,
            attenuation_depth: 3,
            skip_layer: 2,
            signal_depth: 2,
            head_hidden: 8,
            signal_dim: SIGNAL_DIM,
        };
        Model::init(tokenizer_config, mapping_config, rng).unwrap()
    }

    /// A scene whose signal coefficients are jittered away from zero: the
    /// splatter's backward pass treats an exactly-zero emission as dead,
    /// so training always starts from small nonzero harmonics.
    fn small_scene(rng: &mut ChaCha8Rng, n: usize) -> Scene {
        let points: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(1.0..3.0),
                ]
            })
            .collect();
        let config = InitConfig {
            anchor_count: n,
            tx_position: [0.5, -0.5, 2.0],
            ..InitConfig::default()
        };
        let mut scene = Scene::init_from_point_cloud(&points, &config).unwrap();
        for prim in scene.primitives.iter_mut() {
            prim.signal[0] = rng.gen_range(0.5..1.0);
            for s in prim.signal.iter_mut().skip(1) {
                *s = rng.gen_range(-0.05..0.05);
            }
        }
        scene
    }

    fn smooth_setup(width: usize, height: usize) -> RenderSetup {
        // No radius cutoff and no transmittance early exit: the recorded
        // function stays smooth, which finite differences rely on.
        let render = RenderConfig {
            cutoff: f64::INFINITY,
            transmittance_eps: 0.0,
            ..RenderConfig::default()
        };
        RenderSetup {
            plane: PerceptionPlane::uniform(width, height).unwrap(),
            mercator: MercatorConfig::conformal(),
            render,
        }
    }

    fn record_loss_value(
        model: &Model,
        scene: &Scene,
        anchors: &[usize],
        poses: &[[f64; 3]],
        gts: &[Vec<f64>],
        setup: &RenderSetup,
        loss_config: &LossConfig,
        range: f64,
    ) -> f64 {
        let mut tape = Tape::new();
        let (_, loss) = record_pipeline(
            &mut tape,
            model,
            scene,
            anchors,
            poses,
            gts,
            setup,
            loss_config,
            range,
        )
        .unwrap();
        tape.value(loss)[0]
    }

    #[test]
    fn fresh_model_reproduces_its_own_render_at_zero_loss() {
        // Freshly initialized heads emit zero residuals, so the recorded
        // pipeline and the plain path assemble identical primitives; with
        // the ground truth set to the plain render the data terms vanish
        // and the attention regularizer is exactly zero.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = small_model(&mut rng);
        let scene = small_scene(&mut rng, 3);
        let setup = smooth_setup(6, 5);
        let pose = [0.0, 0.0, 0.0];
        let gt = render_with_model(&model, &scene, pose, &setup).unwrap();

        let anchors = scene.select_anchors(scene.len()).unwrap();
        let loss_config = LossConfig::default();
        let range = crate::loss::dynamic_range(&[&gt]);
        let value = record_loss_value(
            &model,
            &scene,
            &anchors,
            &[pose],
            &[gt],
            &setup,
            &loss_config,
            range,
        );
        assert_eq!(value, 0.0);
    }

    #[test]
    fn recording_twice_reproduces_the_loss_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = small_model(&mut rng);
        let scene = small_scene(&mut rng, 3);
        let setup = smooth_setup(5, 4);
        let poses = [[0.0, 0.1, -0.2], [0.3, 0.0, 0.1]];
        let gts: Vec<Vec<f64>> =
            (0..2).map(|_| (0..20).map(|k| (k as f64 * 0.37).sin().abs()).collect()).collect();
        let anchors = scene.select_anchors(2).unwrap();
        let config = LossConfig::default();
        let a = record_loss_value(&model, &scene, &anchors, &poses, &gts, &setup, &config, 1.0);
        let b = record_loss_value(&model, &scene, &anchors, &poses, &gts, &setup, &config, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn shape_and_anchor_misuse_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = small_model(&mut rng);
        let scene = small_scene(&mut rng, 2);
        let setup = smooth_setup(4, 4);
        let mut tape = Tape::new();
        let err = record_pipeline(
            &mut tape,
            &model,
            &scene,
            &[5],
            &[[0.0; 3]],
            &[vec![0.0; 16]],
            &setup,
            &LossConfig::default(),
            1.0,
        );
        assert!(matches!(err, Err(TrainerError::InvalidConfig(_))));

        let mut tape = Tape::new();
        let err = record_pipeline(
            &mut tape,
            &model,
            &scene,
            &[0, 1],
            &[[0.0; 3]],
            &[],
            &setup,
            &LossConfig::default(),
            1.0,
        );
        assert!(matches!(err, Err(TrainerError::SizeMismatch { .. })));
    }

    #[test]
    fn pipeline_gradients_match_finite_differences() {
        // End-to-end check of the whole recorded graph — tokenizer,
        // conditioning networks, residual assembly, splatting, loss —
        // against central differences on a handful of coordinates from
        // every parameter family, scene attributes included.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut model = small_model(&mut rng);
        // The residual heads ship with zero output layers, which silences
        // the gradient of everything upstream of them; spread every
        // all-zero tensor a little so each path carries signal.
        for (_, tensor) in model.tokenizer.tensors_mut() {
            if tensor.iter().all(|&w| w == 0.0) {
                for w in tensor.iter_mut() {
                    *w = rng.gen_range(-0.02..0.02);
                }
            }
        }
        for tensor in model.mapping.tensors_mut() {
            if tensor.iter().all(|&w| w == 0.0) {
                for w in tensor.iter_mut() {
                    *w = rng.gen_range(-0.02..0.02);
                }
            }
        }
        let model = model;
        let scene = small_scene(&mut rng, 2);
        let setup = smooth_setup(4, 4);
        let poses = [[0.1, -0.1, 0.0]];
        let gts: Vec<Vec<f64>> =
            vec![(0..16).map(|k| 0.2 + 0.05 * (k as f64 * 0.9).cos()).collect()];
        let anchors = scene.select_anchors(2).unwrap();
        let config = LossConfig { beta: 0.7, attn_reg: 1e-2, ..LossConfig::default() };
        let range = crate::loss::dynamic_range(&gts);

        let mut tape = Tape::new();
        let (leaves, loss) = record_pipeline(
            &mut tape,
            &model,
            &scene,
            &anchors,
            &poses,
            &gts,
            &setup,
            &config,
            range,
        )
        .unwrap();
        let grads = tape.backward(loss).unwrap();
        let leaf_list = leaves.leaf_list();
        let analytic: Vec<Vec<f64>> = leaf_list.iter().map(|&v| grads.get(v)).collect();

        // Mirror of the leaf order over mutable storage.
        let mut model_fd = model.clone();
        let mut scene_fd = scene.clone();
        let h = 1e-5;
        let mut checked = 0usize;
        let tensor_count = leaf_list.len();
        for tensor_index in 0..tensor_count {
            let tensor_len = analytic[tensor_index].len();
            if tensor_len == 0 {
                continue;
            }
            // Two spread-out coordinates per tensor keeps the sweep cheap.
            for &coord in &[0, tensor_len / 2] {
                let coord = coord.min(tensor_len - 1);
                let mut probe = |value_shift: f64| {
                    shift_coordinate(
                        &mut model_fd,
                        &mut scene_fd,
                        tensor_index,
                        coord,
                        value_shift,
                    );
                    let v = record_loss_value(
                        &model_fd, &scene_fd, &anchors, &poses, &gts, &setup, &config, range,
                    );
                    shift_coordinate(
                        &mut model_fd,
                        &mut scene_fd,
                        tensor_index,
                        coord,
                        -value_shift,
                    );
                    v
                };
                let plus = probe(h);
                let minus = probe(-h);
                let fd = (plus - minus) / (2.0 * h);
                let ad = analytic[tensor_index][coord];
                let denom = ad.abs().max(fd.abs());
                if denom < 1e-10 {
                    continue;
                }
                let rel = (ad - fd).abs() / denom;
                assert!(
                    rel < 1e-4,
                    "tensor {tensor_index} coord {coord}: ad {ad}, fd {fd}, rel {rel}"
                );
                checked += 1;
            }
        }
        assert!(checked > 20, "only {checked} coordinates were comparable");
    }

    /// Adds `shift` to the coordinate that leaf `tensor_index` maps to,
    /// following the exact order of [`PipelineLeaves::leaf_list`].
    fn shift_coordinate(
        model: &mut Model,
        scene: &mut Scene,
        tensor_index: usize,
        coord: usize,
        shift: f64,
    ) {
        let tokenizer_count = model.tokenizer.tensors_mut().len();
        let mapping_count = model.mapping.tensors_mut().len();
        if tensor_index < tokenizer_count {
            model.tokenizer.tensors_mut()[tensor_index].1[coord] += shift;
            return;
        }
        let index = tensor_index - tokenizer_count;
        if index < mapping_count {
            model.mapping.tensors_mut()[index][coord] += shift;
            return;
        }
        let prim = &mut scene.primitives;
        match index - mapping_count {
            0 => prim[coord / 3].position[coord % 3] += shift,
            1 => prim[coord / 4].rotation[coord % 4] += shift,
            2 => prim[coord / 3].log_scale[coord % 3] += shift,
            3 => prim[coord].opacity += shift,
            4 => prim[coord / SIGNAL_DIM].signal[coord % SIGNAL_DIM] += shift,
            _ => panic!("tensor index out of range"),
        }
    }
}
