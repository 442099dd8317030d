//! Projection of 3D Gaussians onto the perception plane.
//!
//! The center goes through the Mercator chart; the covariance goes through
//! the chart's Jacobian (a first-order pushforward), gets symmetrized, and
//! has its eigenvalues floored so every splat stays invertible. The cache
//! type keeps every intermediate the hand-written backward pass needs.

use crate::mercator::MercatorConfig;
use crate::RenderError;
use scene::{quaternion_rotation_matrix, GaussianPrimitive, SH_COEFF_COUNT};

/// Render-ready state of one projected primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGaussian {
    /// Index into the input primitive list.
    pub index: usize,
    /// Chart center in degrees.
    pub u: f64,
    pub v: f64,
    /// Floored symmetric 2x2 covariance, deg^2.
    pub cov: [[f64; 2]; 2],
    /// Its inverse (well-defined thanks to the floor).
    pub inv_cov: [[f64; 2]; 2],
    /// Distance from the receiver in meters.
    pub depth: f64,
    /// Effective opacity, already clamped to [0, 1].
    pub opacity: f64,
    /// Attenuation in (0, 1].
    pub delta: f64,
    /// Evaluated signal magnitude toward the receiver.
    pub signal: f64,
}

/// Eigendecomposition of a symmetric 2x2 matrix: eigenvalues (descending)
/// and the rotation angle of the first eigenvector.
pub(crate) struct Eigen2 {
    pub lambda: [f64; 2],
    pub vec1: [f64; 2],
    pub vec2: [f64; 2],
}

pub(crate) fn eigen_symmetric2(m: &[[f64; 2]; 2]) -> Eigen2 {
    let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
    let t = 0.5 * (a + c);
    let d = 0.5 * (a - c);
    let s = (d * d + b * b).sqrt();
    let theta = 0.5 * (2.0 * b).atan2(2.0 * d);
    let (sin_t, cos_t) = theta.sin_cos();
    Eigen2 {
        lambda: [t + s, t - s],
        vec1: [cos_t, sin_t],
        vec2: [-sin_t, cos_t],
    }
}

/// Everything the backward pass reuses, computed alongside the projection.
pub(crate) struct ProjectionCache {
    pub dir: [f64; 3],
    pub r: f64,
    pub rot: [[f64; 3]; 3],
    pub scale_sq: [f64; 3],
    pub sigma3: [[f64; 3]; 3],
    pub jac: [[f64; 3]; 2],
    pub eigen: Eigen2,
    pub nhat: [f64; 3],
    pub basis: [f64; SH_COEFF_COUNT],
    pub re: f64,
    pub im: f64,
}

/// Projects one primitive. `Ok(None)` means culled (outside the latitude
/// range); errors flag degenerate inputs.
pub fn project_gaussian(
    primitive: &GaussianPrimitive,
    delta: f64,
    index: usize,
    rx_position: [f64; 3],
    mercator: &MercatorConfig,
    covariance_floor: f64,
    min_depth: f64,
) -> Result<Option<ProjectedGaussian>, RenderError> {
    Ok(project_cached(
        primitive,
        delta,
        index,
        rx_position,
        mercator,
        covariance_floor,
        min_depth,
    )?
    .map(|(projected, _)| projected))
}

/// The 2x2 projected covariance alone; `Ok(None)` when the primitive is
/// outside the chart's latitude range.
pub fn project_covariance(
    primitive: &GaussianPrimitive,
    rx_position: [f64; 3],
    mercator: &MercatorConfig,
    covariance_floor: f64,
) -> Result<Option<[[f64; 2]; 2]>, RenderError> {
    let projected =
        project_cached(primitive, 1.0, 0, rx_position, mercator, covariance_floor, 1e-9)?;
    Ok(projected.map(|(p, _)| p.cov))
}

pub(crate) fn project_cached(
    primitive: &GaussianPrimitive,
    delta: f64,
    index: usize,
    rx_position: [f64; 3],
    mercator: &MercatorConfig,
    covariance_floor: f64,
    min_depth: f64,
) -> Result<Option<(ProjectedGaussian, ProjectionCache)>, RenderError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(RenderError::InvalidDelta { index, value: delta });
    }
    let dir = [
        primitive.position[0] - rx_position[0],
        primitive.position[1] - rx_position[1],
        primitive.position[2] - rx_position[2],
    ];
    let r = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if r < min_depth {
        return Err(RenderError::PrimitiveAtReceiver(index));
    }
    let (u, v) = match mercator.project(dir)? {
        Some(center) => center,
        None => return Ok(None),
    };

    // World covariance R diag(e^{2l}) R^T pushed through the chart.
    let rot = quaternion_rotation_matrix(&primitive.rotation);
    let scale_sq = [
        (2.0 * primitive.log_scale[0]).exp(),
        (2.0 * primitive.log_scale[1]).exp(),
        (2.0 * primitive.log_scale[2]).exp(),
    ];
    let mut sigma3 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, s2) in scale_sq.iter().enumerate() {
                sigma3[i][j] += rot[i][k] * s2 * rot[j][k];
            }
        }
    }
    let jac = mercator.jacobian(dir);
    let mut raw = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    raw[a][b] += jac[a][i] * sigma3[i][j] * jac[b][j];
                }
            }
        }
    }
    // Symmetrize against accumulated rounding, then floor the spectrum.
    let off = 0.5 * (raw[0][1] + raw[1][0]);
    raw[0][1] = off;
    raw[1][0] = off;
    let eigen = eigen_symmetric2(&raw);
    let lambda_floored =
        [eigen.lambda[0].max(covariance_floor), eigen.lambda[1].max(covariance_floor)];
    let mut cov = [[0.0; 2]; 2];
    let mut inv_cov = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            cov[a][b] = lambda_floored[0] * eigen.vec1[a] * eigen.vec1[b]
                + lambda_floored[1] * eigen.vec2[a] * eigen.vec2[b];
            inv_cov[a][b] = eigen.vec1[a] * eigen.vec1[b] / lambda_floored[0]
                + eigen.vec2[a] * eigen.vec2[b] / lambda_floored[1];
        }
    }

    // View-dependent signal toward the receiver.
    let nhat = [dir[0] / r, dir[1] / r, dir[2] / r];
    let (signal, re, im, basis) = crate::sh::signal_magnitude_cached(&primitive.signal, nhat);

    let projected = ProjectedGaussian {
        index,
        u,
        v,
        cov,
        inv_cov,
        depth: r,
        opacity: primitive.opacity.clamp(0.0, 1.0),
        delta,
        signal,
    };
    let cache = ProjectionCache {
        dir,
        r,
        rot,
        scale_sq,
        sigma3,
        jac,
        eigen,
        nhat,
        basis,
        re,
        im,
    };
    Ok(Some((projected, cache)))
}

/// Gradient of the floor-and-reconstruct spectral map: pulls a symmetric
/// gradient on the floored covariance back to the raw covariance.
pub(crate) fn floor_backward(
    cache: &ProjectionCache,
    grad_floored: &[[f64; 2]; 2],
    covariance_floor: f64,
) -> [[f64; 2]; 2] {
    let v1 = cache.eigen.vec1;
    let v2 = cache.eigen.vec2;
    let l = cache.eigen.lambda;
    // Rotate the gradient into the eigenbasis.
    let mut g_eig = [[0.0; 2]; 2];
    let vs = [v1, v2];
    for p in 0..2 {
        for q in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    g_eig[p][q] += vs[p][a] * grad_floored[a][b] * vs[q][b];
                }
            }
        }
    }
    // Scaling factors of the spectral map h(x) = max(x, floor): diagonal
    // entries use h', off-diagonals the divided difference.
    let h = |x: f64| x.max(covariance_floor);
    let hp = |x: f64| if x > covariance_floor { 1.0 } else { 0.0 };
    let k12 = if (l[0] - l[1]).abs() > 1e-12 {
        (h(l[0]) - h(l[1])) / (l[0] - l[1])
    } else {
        hp(l[0])
    };
    let k = [[hp(l[0]), k12], [k12, hp(l[1])]];
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    out[a][b] += vs[p][a] * k[p][q] * g_eig[p][q] * vs[q][b];
                }
            }
        }
    }
    out
}

/// dL/dq for the unit-quaternion rotation-matrix map, given dL/dR.
pub(crate) fn rotation_matrix_backward(q: &[f64; 4], grad_r: &[[f64; 3]; 3]) -> [f64; 4] {
    let [w, x, y, z] = *q;
    let dw = [[0.0, -2.0 * z, 2.0 * y], [2.0 * z, 0.0, -2.0 * x], [-2.0 * y, 2.0 * x, 0.0]];
    let dx = [
        [0.0, 2.0 * y, 2.0 * z],
        [2.0 * y, -4.0 * x, -2.0 * w],
        [2.0 * z, 2.0 * w, -4.0 * x],
    ];
    let dy = [
        [-4.0 * y, 2.0 * x, 2.0 * w],
        [2.0 * x, 0.0, 2.0 * z],
        [-2.0 * w, 2.0 * z, -4.0 * y],
    ];
    let dz = [
        [-4.0 * z, -2.0 * w, 2.0 * x],
        [2.0 * w, -4.0 * z, 2.0 * y],
        [2.0 * x, 2.0 * y, 0.0],
    ];
    let contract = |d: &[[f64; 3]; 3]| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += grad_r[i][j] * d[i][j];
            }
        }
        acc
    };
    [contract(&dw), contract(&dx), contract(&dy), contract(&dz)]
}
