//! Re-derives every path the image-source oracle emits, from scratch, over
//! a thousand random reflector layouts: mirror images and bounce points are
//! rebuilt with plain plane geometry, and the reflection law at each
//! realized bounce is checked against an explicit Householder formula. The
//! oracle itself also cross-checks every bounce against a rotor sandwich
//! internally, so a successful enumeration already certifies that the two
//! reflection computations agree.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trainer::{enumerate_paths, RayPath, Reflector, SyntheticSceneSpec};

const EPS: f64 = 1e-9;
const WAVELENGTH: f64 = 0.125;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(sub(a, b))
}

fn signed_distance(reflector: &Reflector, p: [f64; 3]) -> f64 {
    dot(sub(p, reflector.point), reflector.normal)
}

fn mirror(reflector: &Reflector, p: [f64; 3]) -> [f64; 3] {
    let s = signed_distance(reflector, p);
    [
        p[0] - 2.0 * s * reflector.normal[0],
        p[1] - 2.0 * s * reflector.normal[1],
        p[2] - 2.0 * s * reflector.normal[2],
    ]
}

/// Specular reflection of a propagation direction off a unit normal.
fn householder(normal: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let s = dot(v, normal);
    [v[0] - 2.0 * s * normal[0], v[1] - 2.0 * s * normal[1], v[2] - 2.0 * s * normal[2]]
}

/// Intersection of the open segment `a`..`b` with a reflector plane.
fn crossing(reflector: &Reflector, a: [f64; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let sa = signed_distance(reflector, a);
    let sb = signed_distance(reflector, b);
    let denominator = sa - sb;
    if denominator.abs() < EPS {
        return None;
    }
    let t = sa / denominator;
    if t <= 0.0 || t >= 1.0 {
        return None;
    }
    Some([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])])
}

/// One specular route rebuilt by hand: the polyline from the transmitter
/// through its bounce points, plus the product of bounce losses.
struct ExpectedPath {
    /// tx, any bounce points in travel order, then rx.
    polyline: Vec<[f64; 3]>,
    /// Normals of the planes hit, matching the interior polyline points.
    normals: Vec<[f64; 3]>,
    loss_product: f64,
}

fn expected_paths(reflectors: &[Reflector], tx: [f64; 3], rx: [f64; 3]) -> Vec<ExpectedPath> {
    let mut expected = vec![ExpectedPath {
        polyline: vec![tx, rx],
        normals: Vec::new(),
        loss_product: 1.0,
    }];

    for reflector in reflectors {
        if signed_distance(reflector, tx) * signed_distance(reflector, rx) <= 0.0 {
            continue;
        }
        let image = mirror(reflector, tx);
        let Some(bounce) = crossing(reflector, rx, image) else {
            continue;
        };
        expected.push(ExpectedPath {
            polyline: vec![tx, bounce, rx],
            normals: vec![reflector.normal],
            loss_product: reflector.attenuation,
        });
    }

    for (i, first) in reflectors.iter().enumerate() {
        for (j, second) in reflectors.iter().enumerate() {
            if i == j {
                continue;
            }
            let image_one = mirror(first, tx);
            let image_two = mirror(second, image_one);
            let Some(bounce_two) = crossing(second, rx, image_two) else {
                continue;
            };
            let Some(bounce_one) = crossing(first, bounce_two, image_one) else {
                continue;
            };
            expected.push(ExpectedPath {
                polyline: vec![tx, bounce_one, bounce_two, rx],
                normals: vec![first.normal, second.normal],
                loss_product: first.attenuation * second.attenuation,
            });
        }
    }

    expected
}

/// Distance between two angles on the circle.
fn circular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Checks the reflection law along a polyline and returns the quantities a
/// matching [`RayPath`] must carry.
fn realize(path: &ExpectedPath) -> ([f64; 3], f64, f64, f64) {
    let points = &path.polyline;
    let mut length = 0.0;
    for pair in points.windows(2) {
        length += distance(pair[0], pair[1]);
    }
    for (k, normal) in path.normals.iter().enumerate() {
        let incoming = normalize(sub(points[k + 1], points[k]));
        let outgoing = normalize(sub(points[k + 2], points[k + 1]));
        let reflected = householder(*normal, incoming);
        let error = norm(sub(reflected, outgoing));
        assert!(
            error <= EPS,
            "reflection law violated at bounce {k}: |difference| = {error:.3e}"
        );
    }
    let last_leg = points[points.len() - 2];
    let direction = normalize(sub(last_leg, points[points.len() - 1]));
    let attenuation = path.loss_product / length;
    let phase = (TAU * length / WAVELENGTH).rem_euclid(TAU);
    (direction, length, attenuation, phase)
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if norm(v) > 0.3 {
            return normalize(v);
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, span: f64) -> [f64; 3] {
    [
        rng.gen_range(-span..span),
        rng.gen_range(-span..span),
        rng.gen_range(-span..span),
    ]
}

/// A point comfortably away from every plane, so the enumeration never
/// trips its own degeneracy guards.
fn clear_point(rng: &mut ChaCha8Rng, reflectors: &[Reflector], span: f64) -> [f64; 3] {
    loop {
        let p = random_point(rng, span);
        if reflectors.iter().all(|r| signed_distance(r, p).abs() > 1e-3) {
            return p;
        }
    }
}

fn matches(path: &RayPath, direction: [f64; 3], length: f64, attenuation: f64, phase: f64) -> bool {
    norm(sub(path.direction, direction)) <= EPS
        && (path.length - length).abs() <= EPS * (1.0 + length)
        && (path.attenuation - attenuation).abs() <= EPS
        && circular_difference(path.phase, phase) <= 1e-6
}

#[test]
fn a_thousand_random_layouts_obey_the_reflection_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(314159);

    for iteration in 0..1000usize {
        let reflector_count = 1 + iteration % 2;
        let reflectors: Vec<Reflector> = (0..reflector_count)
            .map(|_| Reflector {
                point: random_point(&mut rng, 3.0),
                normal: random_unit(&mut rng),
                attenuation: rng.gen_range(0.1..1.0),
            })
            .collect();
        let tx = clear_point(&mut rng, &reflectors, 4.0);
        let rx = loop {
            let p = clear_point(&mut rng, &reflectors, 4.0);
            if distance(p, tx) > 1e-2 {
                break p;
            }
        };

        let spec = SyntheticSceneSpec {
            reflectors: reflectors.clone(),
            tx_position: tx,
            rx_poses: vec![rx],
            wavelength: WAVELENGTH,
            surface_points_per_side: 1,
            surface_extent: 1.0,
            band: "2.4GHz".to_string(),
        };

        // A successful enumeration already certifies the internal
        // rotor-sandwich cross-check at every bounce.
        let got = enumerate_paths(&spec, rx, 0)
            .unwrap_or_else(|e| panic!("iteration {iteration}: enumeration failed: {e}"));

        let expected = expected_paths(&reflectors, tx, rx);
        assert_eq!(
            got.len(),
            expected.len(),
            "iteration {iteration}: path count mismatch"
        );

        let mut used = vec![false; got.len()];
        for (k, path) in expected.iter().enumerate() {
            let (direction, length, attenuation, phase) = realize(path);
            let bounces = path.normals.len();
            let found = got.iter().enumerate().find(|(idx, candidate)| {
                !used[*idx]
                    && candidate.bounces == bounces
                    && matches(candidate, direction, length, attenuation, phase)
            });
            let Some((idx, _)) = found else {
                panic!(
                    "iteration {iteration}: no oracle path matches rebuilt path {k} \
                     ({bounces} bounces, length {length:.6})"
                );
            };
            used[idx] = true;
        }
    }
}
