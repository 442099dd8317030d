//! Depth-ordered alpha compositing of projected Gaussians, organized by
//! screen tiles for locality, plus the tape operation that makes the whole
//! rendering pass differentiable.
//!
//! Compositing semantics, per pixel, walking splats front to back:
//!
//! ```text
//! g = exp(-q/2)            (0 outside the Mahalanobis support cutoff)
//! w = opacity * g
//! radiance += signal * A * w * T
//! T *= 1 - w               (transmittance from nearer splats)
//! A *= 1 - g * (1 - delta) (accumulated attenuation, gated by g)
//! ```
//!
//! Gating the attenuation by `g` keeps skipped out-of-support splats exact
//! no-ops, so the tiled pass reproduces a per-pixel brute-force walk down
//! to the last bit.

use crate::plane::PerceptionPlane;
use crate::project::{floor_backward, project_cached, rotation_matrix_backward, ProjectedGaussian, ProjectionCache};
use crate::{MercatorConfig, RenderError};
use autodiff::CustomOp;
use scene::{GaussianPrimitive, SH_COEFF_COUNT, SIGNAL_DIM};

/// Knobs for the splatting pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Square tile edge in pixels.
    pub tile_px: usize,
    /// Stop compositing a pixel once transmittance drops below this;
    /// zero disables early termination.
    pub transmittance_eps: f64,
    /// Eigenvalue floor for projected covariances, deg^2.
    pub covariance_floor: f64,
    /// Mahalanobis-squared support cutoff; density is exactly zero beyond.
    pub cutoff: f64,
    /// Primitives closer to the receiver than this are an error.
    pub min_depth: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            tile_px: 16,
            transmittance_eps: 1e-4,
            covariance_floor: 1e-6,
            cutoff: 9.0,
            min_depth: 1e-6,
        }
    }
}

/// Pixel-tile binning of a depth-sorted splat list. Each tile holds indices
/// into the sorted list, preserving the global order.
#[derive(Debug, Clone, PartialEq)]
pub struct TileIndex {
    tile_px: usize,
    tiles_x: usize,
    tiles_y: usize,
    lists: Vec<Vec<usize>>,
}

impl TileIndex {
    /// Bins `projected` (already depth-sorted) against the plane grid.
    /// Each splat lands in every tile its support box overlaps.
    pub fn build(projected: &[ProjectedGaussian], plane: &PerceptionPlane, config: &RenderConfig) -> Self {
        let tile_px = config.tile_px.max(1);
        let tiles_x = plane.width().div_ceil(tile_px);
        let tiles_y = plane.height().div_ceil(tile_px);
        let mut lists = vec![Vec::new(); tiles_x * tiles_y];
        let root = config.cutoff.max(0.0).sqrt();
        for (slot, splat) in projected.iter().enumerate() {
            let hu = root * splat.cov[0][0].max(0.0).sqrt();
            let hv = root * splat.cov[1][1].max(0.0).sqrt();
            let u_coords = plane.u_coords();
            let v_coords = plane.v_coords();
            let c0 = u_coords.partition_point(|&x| x < splat.u - hu);
            let c1 = u_coords.partition_point(|&x| x <= splat.u + hu);
            let r0 = v_coords.partition_point(|&x| x < splat.v - hv);
            let r1 = v_coords.partition_point(|&x| x <= splat.v + hv);
            if c0 >= c1 || r0 >= r1 {
                continue;
            }
            let (t_c0, t_c1) = (c0 / tile_px, (c1 - 1) / tile_px);
            let (t_r0, t_r1) = (r0 / tile_px, (r1 - 1) / tile_px);
            for ty in t_r0..=t_r1 {
                for tx in t_c0..=t_c1 {
                    lists[ty * tiles_x + tx].push(slot);
                }
            }
        }
        Self { tile_px, tiles_x, tiles_y, lists }
    }

    /// Assembles an index from raw parts, for tests that need to hand the
    /// compositor a deliberately malformed layout.
    pub fn from_parts(tile_px: usize, tiles_x: usize, tiles_y: usize, lists: Vec<Vec<usize>>) -> Self {
        Self { tile_px, tiles_x, tiles_y, lists }
    }

    pub fn tile_px(&self) -> usize {
        self.tile_px
    }

    /// Total splat references across all tiles (a splat counts once per tile).
    pub fn reference_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }
}

/// Sorts splats front to back; depth ties fall back to primitive index so
/// the order is deterministic.
pub fn sort_by_depth(projected: &mut [ProjectedGaussian]) {
    projected.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
}

fn density(splat: &ProjectedGaussian, du: f64, dv: f64, cutoff: f64) -> (f64, f64) {
    let ic = &splat.inv_cov;
    let q = du * (ic[0][0] * du + ic[0][1] * dv) + dv * (ic[1][0] * du + ic[1][1] * dv);
    let g = if q > cutoff { 0.0 } else { (-0.5 * q).exp() };
    (q, g)
}

/// Composites the sorted splats over the plane, one tile at a time.
pub fn composite(
    plane: &PerceptionPlane,
    projected: &[ProjectedGaussian],
    tiles: &TileIndex,
    config: &RenderConfig,
) -> Result<Vec<f64>, RenderError> {
    let expected_x = plane.width().div_ceil(tiles.tile_px.max(1));
    let expected_y = plane.height().div_ceil(tiles.tile_px.max(1));
    if (tiles.tiles_x, tiles.tiles_y) != (expected_x, expected_y) {
        return Err(RenderError::TileGridMismatch {
            expected: (expected_x, expected_y),
            got: (tiles.tiles_x, tiles.tiles_y),
        });
    }
    for (tile, list) in tiles.lists.iter().enumerate() {
        for pair in list.windows(2) {
            let (a, b) = (&projected[pair[0]], &projected[pair[1]]);
            if a.depth > b.depth || (a.depth == b.depth && a.index > b.index) {
                return Err(RenderError::UnsortedTile { tile });
            }
        }
    }

    let mut pixels = vec![0.0; plane.pixel_count()];
    let u_coords = plane.u_coords();
    let v_coords = plane.v_coords();
    for ty in 0..tiles.tiles_y {
        for tx in 0..tiles.tiles_x {
            let list = &tiles.lists[ty * tiles.tiles_x + tx];
            if list.is_empty() {
                continue;
            }
            let col_end = ((tx + 1) * tiles.tile_px).min(plane.width());
            let row_end = ((ty + 1) * tiles.tile_px).min(plane.height());
            for row in ty * tiles.tile_px..row_end {
                for col in tx * tiles.tile_px..col_end {
                    let (pu, pv) = (u_coords[col], v_coords[row]);
                    let mut radiance = 0.0;
                    let mut trans = 1.0;
                    let mut atten = 1.0;
                    for &slot in list {
                        let splat = &projected[slot];
                        let (_, g) = density(splat, pu - splat.u, pv - splat.v, config.cutoff);
                        let w = splat.opacity * g;
                        radiance += splat.signal * atten * w * trans;
                        trans *= 1.0 - w;
                        atten *= 1.0 - g * (1.0 - splat.delta);
                        if config.transmittance_eps > 0.0 && trans < config.transmittance_eps {
                            break;
                        }
                    }
                    pixels[plane.index(col, row)] = radiance;
                }
            }
        }
    }
    Ok(pixels)
}

/// Full forward pipeline: project, sort, bin, composite.
pub fn render_map(
    primitives: &[GaussianPrimitive],
    deltas: &[f64],
    rx_position: [f64; 3],
    plane: &PerceptionPlane,
    mercator: &MercatorConfig,
    config: &RenderConfig,
) -> Result<Vec<f64>, RenderError> {
    if deltas.len() != primitives.len() {
        return Err(RenderError::LengthMismatch {
            what: "attenuation factors",
            expected: primitives.len(),
            got: deltas.len(),
        });
    }
    let mut projected = Vec::with_capacity(primitives.len());
    for (index, (prim, &delta)) in primitives.iter().zip(deltas).enumerate() {
        if let Some(splat) = crate::project::project_gaussian(
            prim,
            delta,
            index,
            rx_position,
            mercator,
            config.covariance_floor,
            config.min_depth,
        )? {
            projected.push(splat);
        }
    }
    sort_by_depth(&mut projected);
    let tiles = TileIndex::build(&projected, plane, config);
    composite(plane, &projected, &tiles, config)
}

// ── Tape operation ──────────────────────────────────────────────────────

/// Splatting as a differentiable tape operation.
///
/// Inputs, in order: positions (3N), rotation coefficients (4N), log scales
/// (3N), opacities (N), signal coefficients (18N), attenuations (N). Output
/// is the flattened radiance map, row-major. Rotations are consumed through
/// the unit-quaternion rotation-matrix formula; normalize them upstream on
/// the tape. Invalid geometry (a primitive on top of the receiver, an
/// attenuation outside (0, 1]) panics, since the tape interface has no error
/// channel — callers validate inputs first.
#[derive(Debug, Clone)]
pub struct RenderOp {
    pub rx_position: [f64; 3],
    pub plane: PerceptionPlane,
    pub mercator: MercatorConfig,
    pub config: RenderConfig,
}

struct Parsed<'a> {
    positions: &'a [f64],
    rotations: &'a [f64],
    log_scales: &'a [f64],
    opacities: &'a [f64],
    signals: &'a [f64],
    deltas: &'a [f64],
    count: usize,
}

fn parse_inputs<'a>(inputs: &[&'a [f64]]) -> Parsed<'a> {
    assert_eq!(inputs.len(), 6, "render op expects six input groups");
    let count = inputs[3].len();
    let expect = [3 * count, 4 * count, 3 * count, count, SIGNAL_DIM * count, count];
    for (slice, expected) in inputs.iter().zip(expect) {
        assert_eq!(slice.len(), expected, "render op input group has wrong length");
    }
    Parsed {
        positions: inputs[0],
        rotations: inputs[1],
        log_scales: inputs[2],
        opacities: inputs[3],
        signals: inputs[4],
        deltas: inputs[5],
        count,
    }
}

fn assemble(parsed: &Parsed) -> (Vec<GaussianPrimitive>, Vec<f64>) {
    let mut primitives = Vec::with_capacity(parsed.count);
    for i in 0..parsed.count {
        let mut signal = [0.0; SIGNAL_DIM];
        signal.copy_from_slice(&parsed.signals[SIGNAL_DIM * i..SIGNAL_DIM * (i + 1)]);
        primitives.push(GaussianPrimitive {
            position: [
                parsed.positions[3 * i],
                parsed.positions[3 * i + 1],
                parsed.positions[3 * i + 2],
            ],
            rotation: [
                parsed.rotations[4 * i],
                parsed.rotations[4 * i + 1],
                parsed.rotations[4 * i + 2],
                parsed.rotations[4 * i + 3],
            ],
            log_scale: [
                parsed.log_scales[3 * i],
                parsed.log_scales[3 * i + 1],
                parsed.log_scales[3 * i + 2],
            ],
            opacity: parsed.opacities[i],
            signal,
        });
    }
    (primitives, parsed.deltas.to_vec())
}

/// One splat's state at a particular pixel, kept for the reverse sweep.
struct PixelEntry {
    slot: usize,
    g: f64,
    w: f64,
    t_before: f64,
    a_before: f64,
    contrib: f64,
    du: f64,
    dv: f64,
}

/// Per-splat gradient accumulators filled during the pixel sweep.
#[derive(Clone, Default)]
struct SplatGrad {
    signal: f64,
    opacity: f64,
    delta: f64,
    u: f64,
    v: f64,
    inv_cov: [[f64; 2]; 2],
}

impl CustomOp for RenderOp {
    fn forward(&self, inputs: &[&[f64]]) -> Vec<f64> {
        let parsed = parse_inputs(inputs);
        let (primitives, deltas) = assemble(&parsed);
        render_map(&primitives, &deltas, self.rx_position, &self.plane, &self.mercator, &self.config)
            .expect("render op forward: invalid geometry")
    }

    fn backward(&self, _out_value: &[f64], out_grad: &[f64], inputs: &[&[f64]]) -> Vec<Vec<f64>> {
        let parsed = parse_inputs(inputs);
        let (primitives, deltas) = assemble(&parsed);
        let n = parsed.count;

        // Re-project with full caches, in the same order as the forward pass.
        let mut projected: Vec<ProjectedGaussian> = Vec::new();
        let mut caches: Vec<ProjectionCache> = Vec::new();
        for (index, (prim, &delta)) in primitives.iter().zip(&deltas).enumerate() {
            if let Some((splat, cache)) = project_cached(
                prim,
                delta,
                index,
                self.rx_position,
                &self.mercator,
                self.config.covariance_floor,
                self.config.min_depth,
            )
            .expect("render op backward: invalid geometry")
            {
                projected.push(splat);
                caches.push(cache);
            }
        }
        let mut order: Vec<usize> = (0..projected.len()).collect();
        order.sort_by(|&a, &b| {
            projected[a]
                .depth
                .total_cmp(&projected[b].depth)
                .then(projected[a].index.cmp(&projected[b].index))
        });
        let sorted: Vec<ProjectedGaussian> = order.iter().map(|&i| projected[i].clone()).collect();
        let tiles = TileIndex::build(&sorted, &self.plane, &self.config);

        let mut grads = vec![SplatGrad::default(); sorted.len()];
        let u_coords = self.plane.u_coords();
        let v_coords = self.plane.v_coords();
        let mut entries: Vec<PixelEntry> = Vec::new();
        for ty in 0..tiles.tiles_y {
            for tx in 0..tiles.tiles_x {
                let list = &tiles.lists[ty * tiles.tiles_x + tx];
                if list.is_empty() {
                    continue;
                }
                let col_end = ((tx + 1) * tiles.tile_px).min(self.plane.width());
                let row_end = ((ty + 1) * tiles.tile_px).min(self.plane.height());
                for row in ty * tiles.tile_px..row_end {
                    for col in tx * tiles.tile_px..col_end {
                        let gk = out_grad[self.plane.index(col, row)];
                        if gk == 0.0 {
                            continue;
                        }
                        let (pu, pv) = (u_coords[col], v_coords[row]);

                        // Forward replay, recording active (in-support) splats.
                        entries.clear();
                        let mut trans = 1.0;
                        let mut atten = 1.0;
                        let mut saturated = false;
                        for &slot in list {
                            let splat = &sorted[slot];
                            let (du, dv) = (pu - splat.u, pv - splat.v);
                            let (_, g) = density(splat, du, dv, self.config.cutoff);
                            if g != 0.0 {
                                let w = splat.opacity * g;
                                entries.push(PixelEntry {
                                    slot,
                                    g,
                                    w,
                                    t_before: trans,
                                    a_before: atten,
                                    contrib: splat.signal * atten * w * trans,
                                    du,
                                    dv,
                                });
                                trans *= 1.0 - w;
                                atten *= 1.0 - g * (1.0 - splat.delta);
                                saturated = saturated || 1.0 - w < 1e-8;
                            }
                            if self.config.transmittance_eps > 0.0
                                && trans < self.config.transmittance_eps
                            {
                                break;
                            }
                        }

                        // Fully opaque splats zero out every later prefix
                        // product, so the usual divide-by-(1-w) suffix trick
                        // breaks down; fall back to explicit exclusive
                        // products for the transmittance chain.
                        let wchain: Vec<f64> = if saturated {
                            let m = entries.len();
                            let mut chain = vec![0.0; m];
                            for i in 0..m {
                                let mut texcl = entries[i].t_before;
                                let mut acc = 0.0;
                                for e in entries.iter().skip(i + 1) {
                                    let splat = &sorted[e.slot];
                                    acc += splat.signal * splat.opacity * e.g * e.a_before * texcl;
                                    texcl *= 1.0 - e.w;
                                }
                                chain[i] = -acc;
                            }
                            chain
                        } else {
                            let mut chain = vec![0.0; entries.len()];
                            let mut csuf = 0.0;
                            for (i, e) in entries.iter().enumerate().rev() {
                                chain[i] = -csuf / (1.0 - e.w);
                                csuf += e.contrib;
                            }
                            chain
                        };

                        let mut csuf = 0.0;
                        for (i, e) in entries.iter().enumerate().rev() {
                            let splat = &sorted[e.slot];
                            let den = 1.0 - e.g * (1.0 - splat.delta);
                            let d_signal = e.a_before * e.w * e.t_before;
                            let d_opacity =
                                splat.signal * e.a_before * e.g * e.t_before + e.g * wchain[i];
                            let d_g = splat.signal * e.a_before * splat.opacity * e.t_before
                                + splat.opacity * wchain[i]
                                - csuf * (1.0 - splat.delta) / den;
                            let d_delta = csuf * e.g / den;
                            csuf += e.contrib;

                            let acc = &mut grads[e.slot];
                            acc.signal += gk * d_signal;
                            acc.opacity += gk * d_opacity;
                            acc.delta += gk * d_delta;

                            // g = exp(-q/2) with q = d^T S^{-1} d; the center
                            // enters through d = pixel - center.
                            let dq = -0.5 * e.g * d_g * gk;
                            let ic = &splat.inv_cov;
                            acc.u -= dq * 2.0 * (ic[0][0] * e.du + ic[0][1] * e.dv);
                            acc.v -= dq * 2.0 * (ic[1][0] * e.du + ic[1][1] * e.dv);
                            acc.inv_cov[0][0] += dq * e.du * e.du;
                            acc.inv_cov[0][1] += dq * e.du * e.dv;
                            acc.inv_cov[1][0] += dq * e.dv * e.du;
                            acc.inv_cov[1][1] += dq * e.dv * e.dv;
                        }
                    }
                }
            }
        }

        // Chain the per-splat accumulators back to the raw inputs.
        let mut d_positions = vec![0.0; 3 * n];
        let mut d_rotations = vec![0.0; 4 * n];
        let mut d_log_scales = vec![0.0; 3 * n];
        let mut d_opacities = vec![0.0; n];
        let mut d_signals = vec![0.0; SIGNAL_DIM * n];
        let mut d_deltas = vec![0.0; n];

        for (slot, acc) in grads.iter().enumerate() {
            let splat = &sorted[slot];
            let cache = &caches[order[slot]];
            let pi = splat.index;

            // Opacity reaches the compositor through a clamp to [0, 1].
            let raw_opacity = parsed.opacities[pi];
            if (0.0..=1.0).contains(&raw_opacity) {
                d_opacities[pi] += acc.opacity;
            }
            d_deltas[pi] += acc.delta;

            // dL/dSigma from dL/dSigma^{-1}: dSigma^{-1} = -S^{-1} dS S^{-1}.
            let ic = &splat.inv_cov;
            let mut g_floored = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let mut val = 0.0;
                    for p in 0..2 {
                        for q in 0..2 {
                            val += ic[a][p] * acc.inv_cov[p][q] * ic[q][b];
                        }
                    }
                    g_floored[a][b] = -val;
                }
            }
            let g_raw = floor_backward(cache, &g_floored, self.config.covariance_floor);

            // Covariance pushforward Sigma' = J Sigma3 J^T.
            let jac = &cache.jac;
            let sigma3 = &cache.sigma3;
            let mut d_jac = [[0.0; 3]; 2];
            for a in 0..2 {
                for b in 0..3 {
                    for p in 0..2 {
                        for q in 0..3 {
                            d_jac[a][b] += 2.0 * g_raw[a][p] * jac[p][q] * sigma3[q][b];
                        }
                    }
                }
            }
            let mut g3 = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for a in 0..2 {
                        for b in 0..2 {
                            g3[i][j] += jac[a][i] * g_raw[a][b] * jac[b][j];
                        }
                    }
                }
            }

            // Sigma3 = R diag(e^{2l}) R^T.
            let rot = &cache.rot;
            let mut d_rot = [[0.0; 3]; 3];
            for i in 0..3 {
                for k in 0..3 {
                    for j in 0..3 {
                        d_rot[i][k] += 2.0 * g3[i][j] * rot[j][k] * cache.scale_sq[k];
                    }
                }
            }
            for k in 0..3 {
                let mut diag = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        diag += rot[i][k] * g3[i][j] * rot[j][k];
                    }
                }
                d_log_scales[3 * pi + k] += 2.0 * cache.scale_sq[k] * diag;
            }
            let raw_q = [
                parsed.rotations[4 * pi],
                parsed.rotations[4 * pi + 1],
                parsed.rotations[4 * pi + 2],
                parsed.rotations[4 * pi + 3],
            ];
            let dq = rotation_matrix_backward(&raw_q, &d_rot);
            for k in 0..4 {
                d_rotations[4 * pi + k] += dq[k];
            }

            // Direction gradient: chart Jacobian sensitivity (via the
            // Hessians), chart center, and the view-dependent signal.
            let mut d_dir = [0.0; 3];
            let (h_u, h_v) = self.mercator.hessians(cache.dir);
            for c in 0..3 {
                for b in 0..3 {
                    d_dir[c] += d_jac[0][b] * h_u[b][c] + d_jac[1][b] * h_v[b][c];
                }
                d_dir[c] += jac[0][c] * acc.u + jac[1][c] * acc.v;
            }

            if splat.signal > 0.0 && acc.signal != 0.0 {
                let d_re = acc.signal * cache.re / splat.signal;
                let d_im = acc.signal * cache.im / splat.signal;
                for j in 0..SH_COEFF_COUNT {
                    d_signals[SIGNAL_DIM * pi + j] += d_re * cache.basis[j];
                    d_signals[SIGNAL_DIM * pi + SH_COEFF_COUNT + j] += d_im * cache.basis[j];
                }
                let grad_basis = crate::sh::sh_basis_gradient(cache.nhat);
                let coeffs = &parsed.signals[SIGNAL_DIM * pi..SIGNAL_DIM * (pi + 1)];
                let mut d_nhat = [0.0; 3];
                for j in 0..SH_COEFF_COUNT {
                    let weight = d_re * coeffs[j] + d_im * coeffs[SH_COEFF_COUNT + j];
                    for c in 0..3 {
                        d_nhat[c] += weight * grad_basis[j][c];
                    }
                }
                // nhat = dir / r: pull back through (I - n n^T) / r.
                let nh = cache.nhat;
                let dot = d_nhat[0] * nh[0] + d_nhat[1] * nh[1] + d_nhat[2] * nh[2];
                for c in 0..3 {
                    d_dir[c] += (d_nhat[c] - dot * nh[c]) / cache.r;
                }
            }

            for c in 0..3 {
                d_positions[3 * pi + c] += d_dir[c];
            }
        }

        vec![d_positions, d_rotations, d_log_scales, d_opacities, d_signals, d_deltas]
    }
}
