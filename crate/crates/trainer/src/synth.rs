//! Synthetic ground truth from an image-source ray oracle.
//!
//! Scenes are a transmitter plus a handful of infinite planar reflectors.
//! Specular paths with up to two bounces are enumerated by mirroring the
//! transmitter across reflector planes; every bounce is cross-checked
//! against the geometric-algebra sandwich reflection, so a disagreement
//! flags an internal bug instead of corrupting the dataset. Each receiver
//! pose yields a beam-steered angular spectrum and a coherent multipath
//! power reading.

use crate::measurement::{MeasurementRecord, Observation, RxPose};
use crate::TrainerError;
use ga_core::{reflect_vector, Multivector, Signature, Versor};
use num_complex::Complex64;
use signal_model::{
    angle_power_spectrum, rssi, superpose, AngularSpectrum, ArrayGeometry, ComplexSample,
    MultipathChannel, PathTerm,
};
use std::f64::consts::TAU;

/// An infinite mirror plane through `point` with unit `normal`. Each
/// bounce scales the wave amplitude by `attenuation`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Reflector {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub attenuation: f64,
}

/// Everything the oracle needs: geometry, carrier wavelength in meters,
/// receiver poses, and how densely to sample reflector surfaces when
/// seeding the scene's point cloud.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSceneSpec {
    pub reflectors: Vec<Reflector>,
    pub tx_position: [f64; 3],
    pub rx_poses: Vec<[f64; 3]>,
    pub wavelength: f64,
    pub surface_points_per_side: usize,
    pub surface_extent: f64,
    pub band: String,
}

/// One specular path as seen from the receiver: unit arrival direction,
/// total travelled length, amplitude after spreading and bounce losses,
/// carrier phase, and how many reflections the path took.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    pub direction: [f64; 3],
    pub length: f64,
    pub attenuation: f64,
    pub phase: f64,
    pub bounces: usize,
}

/// Positions that are closer than this to a reflector plane (or to each
/// other) make mirror geometry ill-conditioned.
const GEOMETRY_EPS: f64 = 1e-9;
/// Agreement demanded between the mirror construction and the algebraic
/// reflection, and between unfolded and segment-summed path lengths.
const ORACLE_EPS: f64 = 1e-9;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / norm(a))
}

impl Reflector {
    /// Signed distance of `p` from the plane, positive on the normal side.
    fn signed_distance(&self, p: [f64; 3]) -> f64 {
        dot(sub(p, self.point), self.normal)
    }

    /// Mirror image of `p` across the plane.
    fn mirror(&self, p: [f64; 3]) -> [f64; 3] {
        sub(p, scale(self.normal, 2.0 * self.signed_distance(p)))
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(TrainerError::InvalidSpec("wavelength must be positive"));
        }
        if self.rx_poses.is_empty() {
            return Err(TrainerError::InvalidSpec("at least one receiver pose is needed"));
        }
        if self.tx_position.iter().any(|c| !c.is_finite())
            || self.rx_poses.iter().flatten().any(|c| !c.is_finite())
        {
            return Err(TrainerError::InvalidSpec("positions must be finite"));
        }
        for reflector in &self.reflectors {
            if reflector.point.iter().chain(&reflector.normal).any(|c| !c.is_finite()) {
                return Err(TrainerError::InvalidSpec("reflector geometry must be finite"));
            }
            if (norm(reflector.normal) - 1.0).abs() > GEOMETRY_EPS {
                return Err(TrainerError::InvalidSpec("reflector normal must be unit length"));
            }
            if !(reflector.attenuation > 0.0 && reflector.attenuation <= 1.0) {
                return Err(TrainerError::InvalidSpec(
                    "reflector attenuation must lie in (0, 1]",
                ));
            }
        }
        if self.surface_points_per_side == 0 {
            return Err(TrainerError::InvalidSpec(
                "surface sampling needs at least one point per side",
            ));
        }
        if !(self.surface_extent > 0.0 && self.surface_extent.is_finite()) {
            return Err(TrainerError::InvalidSpec("surface extent must be positive"));
        }
        Ok(())
    }
}

/// Reflects the unit direction `incoming` off a plane with unit `normal`,
/// computing the result both as a Householder update and as an algebraic
/// sandwich. The two must agree to [`ORACLE_EPS`]; a mismatch means one of
/// the two reflection implementations is broken.
fn reflect_direction_checked(
    normal: [f64; 3],
    incoming: [f64; 3],
    pose: usize,
) -> Result<[f64; 3], TrainerError> {
    let householder = sub(incoming, scale(normal, 2.0 * dot(incoming, normal)));

    let signature = Signature::euclidean_pga();
    let reflector = Versor::reflector(&Multivector::spatial_vector(signature, normal))
        .map_err(|_| TrainerError::InvalidSpec("reflector normal is numerically degenerate"))?;
    let image = reflect_vector(&reflector, &Multivector::spatial_vector(signature, incoming))
        .map_err(|_| TrainerError::InvalidSpec("reflection sandwich failed"))?;
    let sandwich = [image.coeff(1), image.coeff(2), image.coeff(3)];

    let error = sub(householder, sandwich).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if error > ORACLE_EPS {
        return Err(TrainerError::OracleDisagreement { pose, error });
    }
    Ok(householder)
}

/// Intersection parameter of the segment from `a` to `b` with the plane,
/// or None if the segment misses it or runs parallel.
fn segment_plane_parameter(reflector: &Reflector, a: [f64; 3], b: [f64; 3]) -> Option<f64> {
    let sa = reflector.signed_distance(a);
    let sb = reflector.signed_distance(b);
    let denominator = sa - sb;
    if denominator.abs() < GEOMETRY_EPS {
        return None;
    }
    let t = sa / denominator;
    if t <= 0.0 || t >= 1.0 {
        return None;
    }
    Some(t)
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    add(a, scale(sub(b, a), t))
}

/// Checks one bounce of a realized path: the direction from `from` into
/// the bounce point must reflect onto the direction out of it.
fn check_bounce(
    reflector: &Reflector,
    from: [f64; 3],
    bounce: [f64; 3],
    to: [f64; 3],
    pose: usize,
) -> Result<(), TrainerError> {
    let incoming = normalize(sub(bounce, from));
    let outgoing = normalize(sub(to, bounce));
    let reflected = reflect_direction_checked(reflector.normal, incoming, pose)?;
    let error = sub(reflected, outgoing).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if error > ORACLE_EPS {
        return Err(TrainerError::OracleDisagreement { pose, error });
    }
    Ok(())
}

/// All specular paths from the spec's transmitter to `rx` with at most two
/// bounces: the free-space path, one path per reflector the endpoints share
/// a side of, and one per ordered pair of distinct reflectors whose
/// unfolded segment crosses both planes. Amplitudes follow a 1/d spreading
/// law scaled by per-bounce attenuation; phases advance by the travelled
/// length over the wavelength.
pub fn enumerate_paths(
    spec: &SyntheticSceneSpec,
    rx: [f64; 3],
    pose: usize,
) -> Result<Vec<RayPath>, TrainerError> {
    spec.validate()?;
    let tx = spec.tx_position;
    if norm(sub(rx, tx)) < GEOMETRY_EPS {
        return Err(TrainerError::DegenerateGeometry {
            pose,
            detail: "receiver coincides with the transmitter",
        });
    }
    for reflector in &spec.reflectors {
        if reflector.signed_distance(rx).abs() < GEOMETRY_EPS {
            return Err(TrainerError::DegenerateGeometry {
                pose,
                detail: "receiver lies on a reflector plane",
            });
        }
        if reflector.signed_distance(tx).abs() < GEOMETRY_EPS {
            return Err(TrainerError::DegenerateGeometry {
                pose,
                detail: "transmitter lies on a reflector plane",
            });
        }
    }

    let phase_of = |length: f64| (TAU * length / spec.wavelength).rem_euclid(TAU);
    let mut paths = Vec::new();

    // Free-space path.
    let los = sub(tx, rx);
    let d = norm(los);
    paths.push(RayPath {
        direction: normalize(los),
        length: d,
        attenuation: 1.0 / d,
        phase: phase_of(d),
        bounces: 0,
    });

    // Single bounces: mirror the transmitter, then walk the straight
    // segment from the receiver to the image. A bounce exists only when
    // both endpoints sit on the same side of the plane.
    for reflector in &spec.reflectors {
        if reflector.signed_distance(tx) * reflector.signed_distance(rx) <= 0.0 {
            continue;
        }
        let image = reflector.mirror(tx);
        let Some(t) = segment_plane_parameter(reflector, rx, image) else {
            continue;
        };
        let bounce = lerp(rx, image, t);
        check_bounce(reflector, tx, bounce, rx, pose)?;

        let length = norm(sub(image, rx));
        let segments = norm(sub(bounce, rx)) + norm(sub(tx, bounce));
        if (length - segments).abs() > ORACLE_EPS {
            return Err(TrainerError::OracleDisagreement {
                pose,
                error: (length - segments).abs(),
            });
        }
        paths.push(RayPath {
            direction: normalize(sub(image, rx)),
            length,
            attenuation: reflector.attenuation / length,
            phase: phase_of(length),
            bounces: 1,
        });
    }

    // Double bounces over ordered reflector pairs: mirror the transmitter
    // across the first plane, mirror that image across the second, then
    // fold the straight receiver-to-image segment back through both
    // planes. Each fold must land strictly inside its segment.
    for (i, first) in spec.reflectors.iter().enumerate() {
        for (j, second) in spec.reflectors.iter().enumerate() {
            if i == j {
                continue;
            }
            let image_one = first.mirror(tx);
            let image_two = second.mirror(image_one);
            if norm(sub(image_two, rx)) < GEOMETRY_EPS {
                return Err(TrainerError::DegenerateGeometry {
                    pose,
                    detail: "receiver coincides with a double-bounce image",
                });
            }
            let Some(t2) = segment_plane_parameter(second, rx, image_two) else {
                continue;
            };
            let bounce_two = lerp(rx, image_two, t2);
            let Some(t1) = segment_plane_parameter(first, bounce_two, image_one) else {
                continue;
            };
            let bounce_one = lerp(bounce_two, image_one, t1);

            check_bounce(first, tx, bounce_one, bounce_two, pose)?;
            check_bounce(second, bounce_one, bounce_two, rx, pose)?;

            let length = norm(sub(image_two, rx));
            let segments = norm(sub(bounce_two, rx))
                + norm(sub(bounce_one, bounce_two))
                + norm(sub(tx, bounce_one));
            if (length - segments).abs() > ORACLE_EPS {
                return Err(TrainerError::OracleDisagreement {
                    pose,
                    error: (length - segments).abs(),
                });
            }
            paths.push(RayPath {
                direction: normalize(sub(image_two, rx)),
                length,
                attenuation: first.attenuation * second.attenuation / length,
                phase: phase_of(length),
                bounces: 2,
            });
        }
    }

    Ok(paths)
}

/// The reader used to manufacture ground-truth spectra: a two-by-two
/// half-wavelength square array. Small enough to keep synthesis cheap,
/// planar so the upper hemisphere is unambiguous.
fn reader_array() -> ArrayGeometry {
    ArrayGeometry::rectangular(2, 2, 0.5).expect("static layout is valid")
}

/// Coherent array snapshot for a set of arriving paths: each element sees
/// every path with the path's own phase plus the plane-wave phase its
/// position picks up along the arrival direction.
fn snapshot_from_paths(geometry: &ArrayGeometry, paths: &[RayPath]) -> Vec<Complex64> {
    geometry
        .positions()
        .iter()
        .map(|p| {
            paths
                .iter()
                .map(|path| {
                    Complex64::from_polar(
                        path.attenuation,
                        path.phase + TAU * dot(*p, path.direction),
                    )
                })
                .sum()
        })
        .collect()
}

fn spectrum_from_paths(paths: &[RayPath]) -> Result<AngularSpectrum, TrainerError> {
    let geometry = reader_array();
    let snapshot = snapshot_from_paths(&geometry, paths);
    Ok(angle_power_spectrum(&geometry, &snapshot)?)
}

fn rssi_from_paths(paths: &[RayPath]) -> f64 {
    let channel = MultipathChannel::new(
        paths.iter().map(|p| PathTerm::new(p.attenuation, p.phase)).collect(),
    );
    rssi(superpose(ComplexSample::new(1.0, 0.0), &channel), 1.0)
}

/// Two orthonormal directions spanning the reflector plane.
fn tangent_basis(normal: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let mut smallest = 0;
    for axis in 1..3 {
        if normal[axis].abs() < normal[smallest].abs() {
            smallest = axis;
        }
    }
    let mut seed = [0.0; 3];
    seed[smallest] = 1.0;
    let t1 = normalize(cross(normal, seed));
    let t2 = cross(normal, t1);
    (t1, t2)
}

/// Regular grid of surface samples on each reflector plus the transmitter
/// itself — the geometry prior a scene is initialized from.
fn surface_point_cloud(spec: &SyntheticSceneSpec) -> Vec<[f64; 3]> {
    let side = spec.surface_points_per_side;
    let mut points = Vec::with_capacity(spec.reflectors.len() * side * side + 1);
    for reflector in &spec.reflectors {
        let (t1, t2) = tangent_basis(reflector.normal);
        for row in 0..side {
            for col in 0..side {
                let offset = |k: usize| {
                    if side == 1 {
                        0.0
                    } else {
                        (k as f64 / (side - 1) as f64 - 0.5) * spec.surface_extent
                    }
                };
                points.push(add(
                    reflector.point,
                    add(scale(t1, offset(col)), scale(t2, offset(row))),
                ));
            }
        }
    }
    points.push(spec.tx_position);
    points
}

/// Manufactures a synthetic dataset: a point cloud to seed the scene from
/// and, per receiver pose, an angular-spectrum record plus a coherent
/// power record. A pose whose paths cancel to zero power keeps its
/// spectrum but marks the power reading invalid.
pub fn synth_generate(
    spec: &SyntheticSceneSpec,
) -> Result<(Vec<[f64; 3]>, Vec<MeasurementRecord>), TrainerError> {
    spec.validate()?;
    let cloud = surface_point_cloud(spec);
    let mut records = Vec::with_capacity(2 * spec.rx_poses.len());
    for (pose_index, &rx) in spec.rx_poses.iter().enumerate() {
        let paths = enumerate_paths(spec, rx, pose_index)?;
        let spectrum = spectrum_from_paths(&paths)?;
        records.push(MeasurementRecord {
            pose: RxPose::at(rx),
            band: spec.band.clone(),
            observation: Observation::Spectrum(spectrum),
            valid: true,
        });
        let power_db = rssi_from_paths(&paths);
        records.push(MeasurementRecord {
            pose: RxPose::at(rx),
            band: spec.band.clone(),
            observation: Observation::Rssi(power_db),
            valid: power_db.is_finite(),
        });
    }
    Ok((cloud, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_spec() -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            reflectors: Vec::new(),
            tx_position: [1.0, 0.0, 0.0],
            rx_poses: vec![[0.0, 0.0, 0.0]],
            wavelength: 0.125,
            surface_points_per_side: 3,
            surface_extent: 2.0,
            band: "2.4GHz".to_string(),
        }
    }

    #[test]
    fn free_space_at_unit_distance_has_unit_amplitude() {
        let spec = base_spec();
        let paths = enumerate_paths(&spec, [0.0, 0.0, 0.0], 0).unwrap();
        assert_eq!(paths.len(), 1);
        let path = &paths[0];
        assert_eq!(path.bounces, 0);
        assert_eq!(path.direction, [1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(path.length, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(path.attenuation, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(path.phase, (TAU / 0.125).rem_euclid(TAU), epsilon = 1e-12);
    }

    #[test]
    fn single_bounce_length_matches_the_mirror_distance() {
        // Wall at x = 2 facing the origin; transmitter and receiver on
        // the near side. The mirror image of the transmitter sits at
        // x = 4 - tx_x, and the bounce path unfolds to a straight line.
        let mut spec = base_spec();
        spec.reflectors.push(Reflector {
            point: [2.0, 0.0, 0.0],
            normal: [-1.0, 0.0, 0.0],
            attenuation: 0.7,
        });
        spec.tx_position = [1.0, 0.5, 0.0];
        let rx = [0.0, -0.5, 0.0];
        let paths = enumerate_paths(&spec, rx, 0).unwrap();
        assert_eq!(paths.len(), 2);
        let bounce = &paths[1];
        assert_eq!(bounce.bounces, 1);

        let image = [3.0, 0.5, 0.0];
        let expected = norm(sub(image, rx));
        assert_abs_diff_eq!(bounce.length, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(bounce.attenuation, 0.7 / expected, epsilon = 1e-12);
        let direction = normalize(sub(image, rx));
        for k in 0..3 {
            assert_abs_diff_eq!(bounce.direction[k], direction[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn parallel_walls_yield_five_paths() {
        // Two facing walls produce the free-space path, one bounce per
        // wall, and both ordered double bounces.
        let mut spec = base_spec();
        spec.reflectors = vec![
            Reflector {
                point: [1.0, 0.0, 0.0],
                normal: [-1.0, 0.0, 0.0],
                attenuation: 0.8,
            },
            Reflector {
                point: [-1.0, 0.0, 0.0],
                normal: [1.0, 0.0, 0.0],
                attenuation: 0.6,
            },
        ];
        spec.tx_position = [0.0, 0.0, 1.0];
        let rx = [0.2, 0.3, 1.0];
        let paths = enumerate_paths(&spec, rx, 0).unwrap();

        let mut counts = [0usize; 3];
        for path in &paths {
            counts[path.bounces] += 1;
        }
        assert_eq!(counts, [1, 2, 2]);
        for path in &paths {
            if path.bounces == 2 {
                assert_abs_diff_eq!(
                    path.attenuation,
                    0.8 * 0.6 / path.length,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn sandwich_reflection_matches_the_householder_formula() {
        let normals = [
            normalize([1.0, 2.0, -0.5]),
            normalize([-0.3, 0.9, 2.2]),
            [0.0, 0.0, 1.0],
        ];
        let directions = [
            normalize([0.4, -1.0, 0.2]),
            normalize([1.0, 1.0, -1.0]),
            normalize([-0.1, 0.0, -1.0]),
        ];
        for n in normals {
            for v in directions {
                let got = reflect_direction_checked(n, v, 0).unwrap();
                let want = sub(v, scale(n, 2.0 * dot(v, n)));
                for k in 0..3 {
                    assert_abs_diff_eq!(got[k], want[k], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_placements_are_rejected() {
        let spec = base_spec();
        let err = enumerate_paths(&spec, spec.tx_position, 3);
        assert_eq!(
            err,
            Err(TrainerError::DegenerateGeometry {
                pose: 3,
                detail: "receiver coincides with the transmitter",
            })
        );

        let mut walled = base_spec();
        walled.reflectors.push(Reflector {
            point: [2.0, 0.0, 0.0],
            normal: [-1.0, 0.0, 0.0],
            attenuation: 0.5,
        });
        let err = enumerate_paths(&walled, [2.0, 1.0, 0.0], 1);
        assert_eq!(
            err,
            Err(TrainerError::DegenerateGeometry {
                pose: 1,
                detail: "receiver lies on a reflector plane",
            })
        );

        walled.tx_position = [2.0, -3.0, 0.4];
        let err = enumerate_paths(&walled, [0.0, 0.0, 0.0], 0);
        assert_eq!(
            err,
            Err(TrainerError::DegenerateGeometry {
                pose: 0,
                detail: "transmitter lies on a reflector plane",
            })
        );
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut spec = base_spec();
        spec.wavelength = 0.0;
        assert!(matches!(spec.validate(), Err(TrainerError::InvalidSpec(_))));

        let mut spec = base_spec();
        spec.rx_poses.clear();
        assert!(matches!(spec.validate(), Err(TrainerError::InvalidSpec(_))));

        let mut spec = base_spec();
        spec.reflectors.push(Reflector {
            point: [0.0; 3],
            normal: [0.0, 2.0, 0.0],
            attenuation: 0.5,
        });
        assert!(matches!(spec.validate(), Err(TrainerError::InvalidSpec(_))));

        let mut spec = base_spec();
        spec.reflectors.push(Reflector {
            point: [0.0; 3],
            normal: [0.0, 1.0, 0.0],
            attenuation: 1.5,
        });
        assert!(matches!(spec.validate(), Err(TrainerError::InvalidSpec(_))));
    }

    #[test]
    fn spectrum_peaks_at_an_on_grid_arrival() {
        // A lone free-space arrival from azimuth 40, elevation 30 —
        // exactly a grid cell — must put the spectrum argmax there.
        let az = 40f64.to_radians();
        let el = 30f64.to_radians();
        let u = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
        let mut spec = base_spec();
        spec.tx_position = scale(u, 5.0);
        let paths = enumerate_paths(&spec, [0.0, 0.0, 0.0], 0).unwrap();
        let spectrum = spectrum_from_paths(&paths).unwrap();
        assert_eq!(spectrum.argmax(), (40, 30));
    }

    #[test]
    fn generated_records_pair_spectra_with_power_readings() {
        let mut spec = base_spec();
        spec.reflectors.push(Reflector {
            point: [2.0, 0.0, 0.0],
            normal: [-1.0, 0.0, 0.0],
            attenuation: 0.7,
        });
        spec.rx_poses = vec![[0.0, 0.0, 0.0], [0.3, -0.2, 0.1]];
        let (cloud, records) = synth_generate(&spec).unwrap();

        // One 3x3 surface grid plus the transmitter point.
        assert_eq!(cloud.len(), 3 * 3 + 1);
        assert_eq!(*cloud.last().unwrap(), spec.tx_position);

        assert_eq!(records.len(), 4);
        for pose_index in 0..2 {
            let spectrum = &records[2 * pose_index];
            let power = &records[2 * pose_index + 1];
            assert_eq!(spectrum.pose, power.pose);
            assert_eq!(spectrum.pose.position, spec.rx_poses[pose_index]);
            assert!(matches!(spectrum.observation, Observation::Spectrum(_)));
            assert!(matches!(power.observation, Observation::Rssi(_)));
            spectrum.validate().unwrap();
            power.validate().unwrap();
        }

        // The power reading matches a direct coherent sum over the paths.
        let paths = enumerate_paths(&spec, spec.rx_poses[0], 0).unwrap();
        let gain: Complex64 = paths
            .iter()
            .map(|p| Complex64::from_polar(p.attenuation, p.phase))
            .sum();
        let Observation::Rssi(db) = records[1].observation else {
            panic!("expected a power record");
        };
        assert_abs_diff_eq!(db, 10.0 * gain.norm_sqr().log10(), epsilon = 1e-9);
    }

    #[test]
    fn surface_grids_lie_on_their_planes() {
        let mut spec = base_spec();
        spec.reflectors.push(Reflector {
            point: [1.0, 2.0, 3.0],
            normal: normalize([1.0, 1.0, 0.5]),
            attenuation: 0.9,
        });
        spec.surface_points_per_side = 4;
        let cloud = surface_point_cloud(&spec);
        assert_eq!(cloud.len(), 4 * 4 + 1);
        let reflector = &spec.reflectors[0];
        for p in &cloud[..16] {
            assert_abs_diff_eq!(reflector.signed_distance(*p), 0.0, epsilon = 1e-12);
        }
        // Extremal points sit half an extent away along each tangent.
        let spread = cloud[..16]
            .iter()
            .map(|p| norm(sub(*p, reflector.point)))
            .fold(0.0f64, f64::max);
        assert_abs_diff_eq!(spread, 2.0f64.sqrt(), epsilon = 1e-12);
    }
}
