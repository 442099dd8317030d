//! Finite-difference validation of the splatting operation's hand-written
//! vector-Jacobian product, across every input group: positions, rotation
//! coefficients, log scales, opacities, signal coefficients, attenuations.

use autodiff::{CustomOp, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use renderer::{MercatorConfig, PerceptionPlane, RenderConfig, RenderOp};
use scene::SIGNAL_DIM;

const FD_STEP: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;

/// Flattened scene inputs in the op's group order.
struct SceneInputs {
    groups: [Vec<f64>; 6],
}

impl SceneInputs {
    fn random(rng: &mut ChaCha20Rng, count: usize) -> Self {
        let mut positions = Vec::new();
        let mut rotations = Vec::new();
        let mut log_scales = Vec::new();
        let mut opacities = Vec::new();
        let mut signals = Vec::new();
        let mut deltas = Vec::new();
        for _ in 0..count {
            let azimuth = rng.gen_range(-2.5..2.5f64);
            let elevation = rng.gen_range(-0.7..0.7f64);
            let distance = rng.gen_range(1.5..4.0);
            positions.extend([
                distance * elevation.cos() * azimuth.cos(),
                distance * elevation.cos() * azimuth.sin(),
                distance * elevation.sin(),
            ]);
            let raw: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-6);
            rotations.extend(raw.iter().map(|v| v / norm));
            for _ in 0..3 {
                log_scales.push(rng.gen_range(0.05f64..0.5).ln());
            }
            opacities.push(rng.gen_range(0.2..0.8));
            for _ in 0..SIGNAL_DIM {
                signals.push(rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
            }
            deltas.push(rng.gen_range(0.3..0.9));
        }
        Self { groups: [positions, rotations, log_scales, opacities, signals, deltas] }
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.groups.iter().map(Vec::as_slice).collect()
    }
}

fn smooth_op(plane_w: usize, plane_h: usize) -> RenderOp {
    RenderOp {
        rx_position: [0.0; 3],
        plane: PerceptionPlane::uniform(plane_w, plane_h).unwrap(),
        mercator: MercatorConfig::conformal(),
        config: RenderConfig {
            // Keep the loss smooth for differencing: no support cutoff, no
            // early termination. Both only gate terms on and off.
            cutoff: f64::INFINITY,
            transmittance_eps: 0.0,
            ..RenderConfig::default()
        },
    }
}

/// Scalar probe: a fixed random weighting of the rendered map.
fn weighted_loss(op: &RenderOp, inputs: &[&[f64]], weights: &[f64]) -> f64 {
    op.forward(inputs).iter().zip(weights).map(|(p, w)| p * w).sum()
}

fn check_all_coordinates(op: &RenderOp, scene: &mut SceneInputs, weights: &[f64]) {
    let map = op.forward(&scene.slices());
    let analytic = op.backward(&map, weights, &scene.slices());
    let group_names = ["positions", "rotations", "log_scales", "opacities", "signals", "deltas"];
    for group in 0..6 {
        for coord in 0..scene.groups[group].len() {
            let original = scene.groups[group][coord];
            scene.groups[group][coord] = original + FD_STEP;
            let plus = weighted_loss(op, &scene.slices(), weights);
            scene.groups[group][coord] = original - FD_STEP;
            let minus = weighted_loss(op, &scene.slices(), weights);
            scene.groups[group][coord] = original;
            let fd = (plus - minus) / (2.0 * FD_STEP);
            let ad = analytic[group][coord];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8);
            assert!(
                rel < REL_TOL,
                "{}[{}]: analytic {:e} vs finite difference {:e} (rel {:e})",
                group_names[group],
                coord,
                ad,
                fd,
                rel
            );
        }
    }
}

#[test]
fn every_input_coordinate_matches_central_differences() {
    let op = smooth_op(16, 8);
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut scene = SceneInputs::random(&mut rng, 4);
    let weights: Vec<f64> =
        (0..op.plane.pixel_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    check_all_coordinates(&op, &mut scene, &weights);
}

#[test]
fn gradients_hold_on_a_second_seed_with_more_overlap() {
    // Denser scene (more mutual occlusion) on a smaller plane.
    let op = smooth_op(12, 6);
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut scene = SceneInputs::random(&mut rng, 6);
    // Pull all splats toward a common direction so they overlap heavily.
    for i in 0..6 {
        scene.groups[0][3 * i] = 2.0 + 0.3 * i as f64;
        scene.groups[0][3 * i + 1] = 0.05 * i as f64;
        scene.groups[0][3 * i + 2] = 0.02 * i as f64;
    }
    let weights: Vec<f64> =
        (0..op.plane.pixel_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    check_all_coordinates(&op, &mut scene, &weights);
}

#[test]
fn saturated_splat_takes_the_exclusive_product_path() {
    // The front splat's center lands exactly on a pixel center with full
    // opacity, so 1 - w underflows the safe-division threshold there and
    // the backward pass must fall back to exclusive products.
    let op = smooth_op(16, 8);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut scene = SceneInputs::random(&mut rng, 3);
    // Pixel centers sit at u = -180 + (i + 0.5) * 22.5, v = -60 + (j + 0.5) * 15.
    let u = (-180.0 + 8.5 * 22.5f64).to_radians();
    let v_deg: f64 = -60.0 + 4.5 * 15.0;
    // v = alpha * atanh(z / r) with the conformal alpha = 180 / pi.
    let lat = (v_deg.to_radians()).tanh().asin();
    let dist = 2.0;
    scene.groups[0][0] = dist * lat.cos() * u.cos();
    scene.groups[0][1] = dist * lat.cos() * u.sin();
    scene.groups[0][2] = dist * lat.sin();
    scene.groups[3][0] = 1.0; // fully opaque
    // Put the other two directly behind it.
    for i in 1..3 {
        scene.groups[0][3 * i] = scene.groups[0][0] * (1.0 + i as f64);
        scene.groups[0][3 * i + 1] = scene.groups[0][1] * (1.0 + i as f64);
        scene.groups[0][3 * i + 2] = scene.groups[0][2] * (1.0 + i as f64);
    }

    // Verify the construction: the front splat saturates its center pixel.
    let map = op.forward(&scene.slices());
    let weights: Vec<f64> = (0..map.len()).map(|i| 0.1 + 0.01 * i as f64).collect();
    let analytic = op.backward(&map, &weights, &scene.slices());

    // The saturated opacity sits on the clamp boundary; skip it and the
    // quantities it freezes, but difference everything else.
    let group_names = ["positions", "rotations", "log_scales", "opacities", "signals", "deltas"];
    for group in 0..6 {
        for coord in 0..scene.groups[group].len() {
            if group == 3 && coord == 0 {
                continue; // clamped at 1.0: one-sided derivative
            }
            let original = scene.groups[group][coord];
            scene.groups[group][coord] = original + FD_STEP;
            let plus = weighted_loss(&op, &scene.slices(), &weights);
            scene.groups[group][coord] = original - FD_STEP;
            let minus = weighted_loss(&op, &scene.slices(), &weights);
            scene.groups[group][coord] = original;
            let fd = (plus - minus) / (2.0 * FD_STEP);
            let ad = analytic[group][coord];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8);
            assert!(
                rel < 2e-4,
                "{}[{}]: analytic {:e} vs fd {:e}",
                group_names[group],
                coord,
                ad,
                fd
            );
        }
    }
}

#[test]
fn out_of_support_splats_get_zero_gradient_under_the_hard_cutoff() {
    // With the default cutoff, a splat whose support misses every pixel
    // that carries output gradient must receive exactly zero gradient.
    let op = RenderOp {
        rx_position: [0.0; 3],
        plane: PerceptionPlane::uniform(16, 8).unwrap(),
        mercator: MercatorConfig::conformal(),
        config: RenderConfig { transmittance_eps: 0.0, ..RenderConfig::default() },
    };
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let mut scene = SceneInputs::random(&mut rng, 2);
    // Tiny second splat tucked far from the first in azimuth.
    scene.groups[0][3] = -3.0;
    scene.groups[0][4] = -0.2;
    scene.groups[0][5] = 0.1;
    for k in 0..3 {
        scene.groups[2][3 + k] = (0.001f64).ln();
    }
    let map = op.forward(&scene.slices());
    // Upstream gradient only where the FIRST splat lives: weight the pixel
    // nearest its center.
    let mut weights = vec![0.0; map.len()];
    let idx = map
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    weights[idx] = 1.0;
    let analytic = op.backward(&map, &weights, &scene.slices());
    for group in &analytic {
        // Second primitive's entries all zero.
        let per = group.len() / 2;
        for coord in per..group.len() {
            assert_eq!(group[coord], 0.0, "expected hard zero for far splat");
        }
    }
}

#[test]
fn tape_recorded_render_matches_direct_op_gradients() {
    // Drive the op through the tape: leaves -> custom op -> dot with a
    // constant -> backward, and compare against calling the op directly.
    let op = smooth_op(12, 6);
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let scene = SceneInputs::random(&mut rng, 3);
    let weights: Vec<f64> =
        (0..op.plane.pixel_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut tape = Tape::new();
    let leaves: Vec<_> = scene.groups.iter().map(|g| tape.leaf(g.clone())).collect();
    let map_var = tape.custom(Box::new(op.clone()), &leaves);
    let weight_var = tape.constant(weights.clone());
    let loss = tape.dot(map_var, weight_var);
    let grads = tape.backward(loss).unwrap();

    let map = op.forward(&scene.slices());
    let direct = op.backward(&map, &weights, &scene.slices());
    for (leaf, expect) in leaves.iter().zip(&direct) {
        let got = grads.get(*leaf);
        assert_eq!(got.len(), expect.len());
        for (a, b) in got.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
