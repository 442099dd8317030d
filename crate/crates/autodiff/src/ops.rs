//! The fixed operation set.
//!
//! Every op implements [`Operation::backward`]: given the node's forward
//! value, the incoming gradient and the parent values, produce one gradient
//! vector per parent. Shape validation happens at recording time with
//! asserts (shape bugs are programming errors, not runtime conditions).

use crate::{Tape, Var};
use std::sync::Arc;

pub(crate) trait Operation {
    fn backward(&self, out_value: &[f64], out_grad: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>>;
}

/// User-supplied operation with a hand-written vector-Jacobian product.
/// The renderer plugs its splatting pass into the tape through this.
pub trait CustomOp {
    fn forward(&self, inputs: &[&[f64]]) -> Vec<f64>;
    fn backward(&self, out_value: &[f64], out_grad: &[f64], inputs: &[&[f64]]) -> Vec<Vec<f64>>;
}

struct CustomAdapter(Box<dyn CustomOp>);

impl Operation for CustomAdapter {
    fn backward(&self, out_value: &[f64], out_grad: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        self.0.backward(out_value, out_grad, parents)
    }
}

// ── Pointwise ───────────────────────────────────────────────────────────

enum PointwiseKind {
    Sigmoid,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Neg,
    Scale(f64),
    AddConst,
    Clamp(f64, f64),
}

struct Pointwise {
    kind: PointwiseKind,
}

impl Operation for Pointwise {
    fn backward(&self, out_value: &[f64], out_grad: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let x = parents[0];
        let g = out_grad;
        let dx: Vec<f64> = match self.kind {
            PointwiseKind::Sigmoid => {
                out_value.iter().zip(g).map(|(y, g)| g * y * (1.0 - y)).collect()
            }
            PointwiseKind::Tanh => out_value.iter().zip(g).map(|(y, g)| g * (1.0 - y * y)).collect(),
            PointwiseKind::Exp => out_value.iter().zip(g).map(|(y, g)| g * y).collect(),
            PointwiseKind::Ln => x.iter().zip(g).map(|(x, g)| g / x).collect(),
            PointwiseKind::Sqrt => out_value.iter().zip(g).map(|(y, g)| g * 0.5 / y).collect(),
            PointwiseKind::Abs => x
                .iter()
                .zip(g)
                .map(|(x, g)| if *x > 0.0 { *g } else if *x < 0.0 { -*g } else { 0.0 })
                .collect(),
            PointwiseKind::Neg => g.iter().map(|g| -g).collect(),
            PointwiseKind::Scale(c) => g.iter().map(|g| g * c).collect(),
            PointwiseKind::AddConst => g.to_vec(),
            PointwiseKind::Clamp(lo, hi) => {
                x.iter().zip(g).map(|(x, g)| if *x >= lo && *x <= hi { *g } else { 0.0 }).collect()
            }
        };
        vec![dx]
    }
}

// ── Elementwise binary ──────────────────────────────────────────────────

enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

struct Binary {
    kind: BinaryKind,
}

impl Operation for Binary {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (a, b) = (parents[0], parents[1]);
        match self.kind {
            BinaryKind::Add => vec![g.to_vec(), g.to_vec()],
            BinaryKind::Sub => vec![g.to_vec(), g.iter().map(|g| -g).collect()],
            BinaryKind::Mul => vec![
                g.iter().zip(b).map(|(g, b)| g * b).collect(),
                g.iter().zip(a).map(|(g, a)| g * a).collect(),
            ],
            BinaryKind::Div => {
                let da: Vec<f64> = g.iter().zip(b).map(|(g, b)| g / b).collect();
                let db: Vec<f64> =
                    g.iter().zip(a.iter().zip(b)).map(|(g, (a, b))| -g * a / (b * b)).collect();
                vec![da, db]
            }
        }
    }
}

/// a - s and a * s with a broadcast scalar s.
enum BcastKind {
    Sub,
    Mul,
}

struct Bcast {
    kind: BcastKind,
}

impl Operation for Bcast {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let a = parents[0];
        let s = parents[1][0];
        match self.kind {
            BcastKind::Sub => vec![g.to_vec(), vec![-g.iter().sum::<f64>()]],
            BcastKind::Mul => vec![
                g.iter().map(|g| g * s).collect(),
                vec![g.iter().zip(a).map(|(g, a)| g * a).sum::<f64>()],
            ],
        }
    }
}

// ── Reductions ──────────────────────────────────────────────────────────

enum ReduceKind {
    Sum,
    Mean,
    Max,
}

struct Reduce {
    kind: ReduceKind,
}

impl Operation for Reduce {
    fn backward(&self, out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let x = parents[0];
        let g0 = g[0];
        let dx = match self.kind {
            ReduceKind::Sum => vec![g0; x.len()],
            ReduceKind::Mean => vec![g0 / x.len() as f64; x.len()],
            ReduceKind::Max => {
                // Gradient flows to the first element attaining the max.
                let mut dx = vec![0.0; x.len()];
                if let Some(pos) = x.iter().position(|&v| v == out[0]) {
                    dx[pos] = g0;
                }
                dx
            }
        };
        vec![dx]
    }
}

struct Dot;

impl Operation for Dot {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (a, b) = (parents[0], parents[1]);
        let g0 = g[0];
        vec![b.iter().map(|b| g0 * b).collect(), a.iter().map(|a| g0 * a).collect()]
    }
}

struct IndexDot {
    indices: Arc<Vec<usize>>,
}

impl Operation for IndexDot {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (a, b) = (parents[0], parents[1]);
        let g0 = g[0];
        let mut da = vec![0.0; a.len()];
        let mut db = vec![0.0; b.len()];
        for &k in self.indices.iter() {
            da[k] = g0 * b[k];
            db[k] = g0 * a[k];
        }
        vec![da, db]
    }
}

// ── Softmax ─────────────────────────────────────────────────────────────

struct Softmax;

impl Operation for Softmax {
    fn backward(&self, y: &[f64], g: &[f64], _parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let inner: f64 = y.iter().zip(g).map(|(y, g)| y * g).sum();
        vec![y.iter().zip(g).map(|(y, g)| y * (g - inner)).collect()]
    }
}

// ── Shape plumbing ──────────────────────────────────────────────────────

struct Concat {
    lens: Vec<usize>,
}

impl Operation for Concat {
    fn backward(&self, _out: &[f64], g: &[f64], _parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut offset = 0;
        self.lens
            .iter()
            .map(|&len| {
                let piece = g[offset..offset + len].to_vec();
                offset += len;
                piece
            })
            .collect()
    }
}

struct Slice {
    start: usize,
    parent_len: usize,
}

impl Operation for Slice {
    fn backward(&self, _out: &[f64], g: &[f64], _parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut dx = vec![0.0; self.parent_len];
        dx[self.start..self.start + g.len()].copy_from_slice(g);
        vec![dx]
    }
}

struct Gather {
    indices: Arc<Vec<usize>>,
    parent_len: usize,
}

impl Operation for Gather {
    fn backward(&self, _out: &[f64], g: &[f64], _parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut dx = vec![0.0; self.parent_len];
        for (gi, &k) in g.iter().zip(self.indices.iter()) {
            dx[k] += gi;
        }
        vec![dx]
    }
}

// ── Linear algebra ──────────────────────────────────────────────────────

/// Batched affine map. x is `batch` rows of `in_dim`, y is `batch` rows of
/// `out_dim`, weights are row-major `out_dim x in_dim`.
struct Linear {
    out_dim: usize,
    in_dim: usize,
    batch: usize,
}

impl Operation for Linear {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (w, _bias, x) = (parents[0], parents[1], parents[2]);
        let (o, i, bt) = (self.out_dim, self.in_dim, self.batch);
        let mut dw = vec![0.0; o * i];
        let mut dbias = vec![0.0; o];
        let mut dx = vec![0.0; bt * i];
        for b in 0..bt {
            let xb = &x[b * i..(b + 1) * i];
            let gb = &g[b * o..(b + 1) * o];
            for (oo, &go) in gb.iter().enumerate() {
                dbias[oo] += go;
                let wrow = &w[oo * i..(oo + 1) * i];
                let dwrow = &mut dw[oo * i..(oo + 1) * i];
                let dxb = &mut dx[b * i..(b + 1) * i];
                for ii in 0..i {
                    dwrow[ii] += go * xb[ii];
                    dxb[ii] += go * wrow[ii];
                }
            }
        }
        vec![dw, dbias, dx]
    }
}

struct Normalize;

impl Operation for Normalize {
    fn backward(&self, y: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let x = parents[0];
        let n = x.iter().map(|x| x * x).sum::<f64>().sqrt();
        let gy: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
        vec![g.iter().zip(y).map(|(g, y)| (g - y * gy) / n).collect()]
    }
}

/// y = sum_i w_i * v_i over n items of equal length.
struct WeightedSum {
    n_items: usize,
}

impl Operation for WeightedSum {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let w = parents[0];
        let mut grads = Vec::with_capacity(1 + self.n_items);
        let mut dw = vec![0.0; self.n_items];
        for (i, dwi) in dw.iter_mut().enumerate() {
            *dwi = g.iter().zip(parents[1 + i]).map(|(g, v)| g * v).sum();
        }
        grads.push(dw);
        for i in 0..self.n_items {
            grads.push(g.iter().map(|g| g * w[i]).collect());
        }
        grads
    }
}

/// z_k += c * a_i * b_j over a fixed sparse triple table (e.g. a Cayley
/// table for multivector products).
struct SparseBilinear {
    triples: Arc<Vec<(usize, usize, usize, f64)>>,
}

impl Operation for SparseBilinear {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (a, b) = (parents[0], parents[1]);
        let mut da = vec![0.0; a.len()];
        let mut db = vec![0.0; b.len()];
        for &(i, j, k, c) in self.triples.iter() {
            da[i] += c * b[j] * g[k];
            db[j] += c * a[i] * g[k];
        }
        vec![da, db]
    }
}

/// Block-structured channel mixing: coefficients are grouped into blocks
/// (e.g. blade subspaces) and each block gets its own channel-mixing
/// matrix: y[co*dim + d] = sum_ci W[block(d)][co][ci] * x[ci*dim + d].
struct BlockMixLinear {
    block_of: Arc<Vec<usize>>,
    n_blocks: usize,
    in_channels: usize,
    out_channels: usize,
}

impl Operation for BlockMixLinear {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (w, x) = (parents[0], parents[1]);
        let dim = self.block_of.len();
        let (ic, oc) = (self.in_channels, self.out_channels);
        let mut dw = vec![0.0; self.n_blocks * oc * ic];
        let mut dx = vec![0.0; ic * dim];
        for d in 0..dim {
            let blk = self.block_of[d];
            for co in 0..oc {
                let go = g[co * dim + d];
                if go == 0.0 {
                    continue;
                }
                let wrow = blk * oc * ic + co * ic;
                for ci in 0..ic {
                    dw[wrow + ci] += go * x[ci * dim + d];
                    dx[ci * dim + d] += go * w[wrow + ci];
                }
            }
        }
        vec![dw, dx]
    }
}

/// Gated nonlinearity per channel and block: every coefficient in channel c
/// and block beta is scaled by sigmoid(a[c][beta] * s_c + b[c][beta]) where
/// s_c is the channel's coefficient 0 (assumed to sit in block 0, an
/// invariant slot).
struct GradeGate {
    block_of: Arc<Vec<usize>>,
    n_blocks: usize,
    channels: usize,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Operation for GradeGate {
    fn backward(&self, _out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let (x, a, b) = (parents[0], parents[1], parents[2]);
        let dim = self.block_of.len();
        let nb = self.n_blocks;
        let mut dx = vec![0.0; x.len()];
        let mut da = vec![0.0; a.len()];
        let mut db = vec![0.0; b.len()];
        for c in 0..self.channels {
            let s = x[c * dim];
            for d in 0..dim {
                let beta = self.block_of[d];
                let u = a[c * nb + beta] * s + b[c * nb + beta];
                let sig = sigmoid(u);
                let dsig = sig * (1.0 - sig);
                let xd = x[c * dim + d];
                let gd = g[c * dim + d];
                dx[c * dim + d] += gd * sig;
                dx[c * dim] += gd * xd * dsig * a[c * nb + beta];
                da[c * nb + beta] += gd * xd * dsig * s;
                db[c * nb + beta] += gd * xd * dsig;
            }
        }
        vec![dx, da, db]
    }
}

/// Sinusoidal positional features: for each frequency f and input
/// component x_a, push sin(2^f pi x_a / scale) then cos of the same angle.
struct SinCos {
    n_freqs: usize,
    scale: f64,
}

impl Operation for SinCos {
    fn backward(&self, out: &[f64], g: &[f64], parents: &[&[f64]]) -> Vec<Vec<f64>> {
        let x = parents[0];
        let mut dx = vec![0.0; x.len()];
        let mut pos = 0;
        for f in 0..self.n_freqs {
            let rate = (2.0f64).powi(f as i32) * std::f64::consts::PI / self.scale;
            for dxa in dx.iter_mut() {
                let (s, c) = (out[pos], out[pos + 1]);
                *dxa += rate * (g[pos] * c - g[pos + 1] * s);
                pos += 2;
            }
        }
        vec![dx]
    }
}

// ── Separable 2D convolution (fixed kernel, renormalized borders) ───────

/// Convolves rows then columns of an h x w grid with a fixed odd-length
/// kernel. Windows truncated by the border are renormalized so the weights
/// always sum to 1, which keeps the op exact on constant inputs.
struct ConvSep2d {
    h: usize,
    w: usize,
    kernel: Arc<Vec<f64>>,
}

fn conv1d_axis(
    input: &[f64],
    output: &mut [f64],
    n_lines: usize,
    line_len: usize,
    stride: usize,
    line_stride: usize,
    kernel: &[f64],
    adjoint: bool,
) {
    let c = kernel.len() / 2;
    for line in 0..n_lines {
        let base = line * line_stride;
        for i in 0..line_len {
            let lo = i.saturating_sub(c);
            let hi = (i + c).min(line_len - 1);
            let mut norm = 0.0;
            for j in lo..=hi {
                norm += kernel[j + c - i];
            }
            if adjoint {
                // Scatter: out[j] += K[j-i+c]/norm * in[i]
                let v = input[base + i * stride] / norm;
                for j in lo..=hi {
                    output[base + j * stride] += kernel[j + c - i] * v;
                }
            } else {
                let mut acc = 0.0;
                for j in lo..=hi {
                    acc += kernel[j + c - i] * input[base + j * stride];
                }
                output[base + i * stride] = acc / norm;
            }
        }
    }
}

fn conv_sep_forward(x: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let mut tmp = vec![0.0; h * w];
    // Along rows (contiguous), then along columns.
    conv1d_axis(x, &mut tmp, h, w, 1, w, kernel, false);
    let mut out = vec![0.0; h * w];
    conv1d_axis(&tmp, &mut out, w, h, w, 1, kernel, false);
    out
}

impl Operation for ConvSep2d {
    fn backward(&self, _out: &[f64], g: &[f64], _parents: &[&[f64]]) -> Vec<Vec<f64>> {
        // Adjoint of (columns after rows) is (rows-adjoint after
        // columns-adjoint).
        let mut tmp = vec![0.0; self.h * self.w];
        conv1d_axis(g, &mut tmp, self.w, self.h, self.w, 1, &self.kernel, true);
        let mut dx = vec![0.0; self.h * self.w];
        conv1d_axis(&tmp, &mut dx, self.h, self.w, 1, self.w, &self.kernel, true);
        vec![dx]
    }
}

// ── Tape methods ────────────────────────────────────────────────────────

impl Tape {
    fn pointwise(&mut self, x: Var, kind: PointwiseKind, value: Vec<f64>) -> Var {
        self.push(value, vec![x.index], Some(Box::new(Pointwise { kind })), false)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.pointwise(x, PointwiseKind::Sigmoid, value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.tanh()).collect();
        self.pointwise(x, PointwiseKind::Tanh, value)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.exp()).collect();
        self.pointwise(x, PointwiseKind::Exp, value)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.ln()).collect();
        self.pointwise(x, PointwiseKind::Ln, value)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.sqrt()).collect();
        self.pointwise(x, PointwiseKind::Sqrt, value)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.abs()).collect();
        self.pointwise(x, PointwiseKind::Abs, value)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| -v).collect();
        self.pointwise(x, PointwiseKind::Neg, value)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).iter().map(|v| v * c).collect();
        self.pointwise(x, PointwiseKind::Scale(c), value)
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).iter().map(|v| v + c).collect();
        self.pointwise(x, PointwiseKind::AddConst, value)
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(x).iter().map(|v| v.clamp(lo, hi)).collect();
        self.pointwise(x, PointwiseKind::Clamp(lo, hi), value)
    }

    fn binary(&mut self, a: Var, b: Var, kind: BinaryKind) -> Var {
        assert_eq!(a.len, b.len, "elementwise op length mismatch");
        let value: Vec<f64> = {
            let (va, vb) = (self.value(a), self.value(b));
            match kind {
                BinaryKind::Add => va.iter().zip(vb).map(|(a, b)| a + b).collect(),
                BinaryKind::Sub => va.iter().zip(vb).map(|(a, b)| a - b).collect(),
                BinaryKind::Mul => va.iter().zip(vb).map(|(a, b)| a * b).collect(),
                BinaryKind::Div => va.iter().zip(vb).map(|(a, b)| a / b).collect(),
            }
        };
        self.push(value, vec![a.index, b.index], Some(Box::new(Binary { kind })), false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Div)
    }

    /// a - s with scalar s broadcast over a.
    pub fn sub_bcast(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(s.len, 1, "broadcast operand must be scalar");
        let sv = self.value(s)[0];
        let value = self.value(a).iter().map(|a| a - sv).collect();
        self.push(
            value,
            vec![a.index, s.index],
            Some(Box::new(Bcast { kind: BcastKind::Sub })),
            false,
        )
    }

    /// a * s with scalar s broadcast over a.
    pub fn mul_bcast(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(s.len, 1, "broadcast operand must be scalar");
        let sv = self.value(s)[0];
        let value = self.value(a).iter().map(|a| a * sv).collect();
        self.push(
            value,
            vec![a.index, s.index],
            Some(Box::new(Bcast { kind: BcastKind::Mul })),
            false,
        )
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = vec![self.value(x).iter().sum()];
        self.push(value, vec![x.index], Some(Box::new(Reduce { kind: ReduceKind::Sum })), false)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let value = vec![self.value(x).iter().sum::<f64>() / x.len as f64];
        self.push(value, vec![x.index], Some(Box::new(Reduce { kind: ReduceKind::Mean })), false)
    }

    pub fn max_reduce(&mut self, x: Var) -> Var {
        let value = vec![self.value(x).iter().copied().fold(f64::NEG_INFINITY, f64::max)];
        self.push(value, vec![x.index], Some(Box::new(Reduce { kind: ReduceKind::Max })), false)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(a.len, b.len, "dot length mismatch");
        let value = vec![self.value(a).iter().zip(self.value(b)).map(|(a, b)| a * b).sum()];
        self.push(value, vec![a.index, b.index], Some(Box::new(Dot)), false)
    }

    /// Inner product restricted to a fixed index set.
    pub fn index_dot(&mut self, a: Var, b: Var, indices: Arc<Vec<usize>>) -> Var {
        assert_eq!(a.len, b.len, "index_dot length mismatch");
        let (va, vb) = (self.value(a), self.value(b));
        let value = vec![indices.iter().map(|&k| va[k] * vb[k]).sum()];
        self.push(value, vec![a.index, b.index], Some(Box::new(IndexDot { indices })), false)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value: Vec<f64> = exps.iter().map(|e| e / total).collect();
        self.push(value, vec![x.index], Some(Box::new(Softmax)), false)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::with_capacity(parts.iter().map(|p| p.len).sum());
        for p in parts {
            value.extend_from_slice(self.value(*p));
        }
        let lens = parts.iter().map(|p| p.len).collect();
        self.push(
            value,
            parts.iter().map(|p| p.index).collect(),
            Some(Box::new(Concat { lens })),
            false,
        )
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        assert!(start + len <= x.len, "slice out of range");
        let value = self.value(x)[start..start + len].to_vec();
        self.push(
            value,
            vec![x.index],
            Some(Box::new(Slice { start, parent_len: x.len })),
            false,
        )
    }

    pub fn gather(&mut self, x: Var, indices: Arc<Vec<usize>>) -> Var {
        let xs = self.value(x);
        let value: Vec<f64> = indices.iter().map(|&k| xs[k]).collect();
        self.push(
            value,
            vec![x.index],
            Some(Box::new(Gather { indices, parent_len: x.len })),
            false,
        )
    }

    /// Batched affine map; see [`Linear`].
    pub fn linear(&mut self, w: Var, bias: Var, x: Var, out_dim: usize, in_dim: usize) -> Var {
        assert_eq!(w.len, out_dim * in_dim, "weight shape mismatch");
        assert_eq!(bias.len, out_dim, "bias shape mismatch");
        assert_eq!(x.len % in_dim, 0, "input is not a whole number of rows");
        let batch = x.len / in_dim;
        let mut value = vec![0.0; batch * out_dim];
        {
            let (wv, bv, xv) = (self.value(w), self.value(bias), self.value(x));
            for b in 0..batch {
                let xb = &xv[b * in_dim..(b + 1) * in_dim];
                let yb = &mut value[b * out_dim..(b + 1) * out_dim];
                for (o, y) in yb.iter_mut().enumerate() {
                    let wrow = &wv[o * in_dim..(o + 1) * in_dim];
                    let mut acc = bv[o];
                    for (wi, xi) in wrow.iter().zip(xb) {
                        acc += wi * xi;
                    }
                    *y = acc;
                }
            }
        }
        self.push(
            value,
            vec![w.index, bias.index, x.index],
            Some(Box::new(Linear { out_dim, in_dim, batch })),
            false,
        )
    }

    /// x / ||x||_2.
    pub fn normalize(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let n = xs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let value = xs.iter().map(|x| x / n).collect();
        self.push(value, vec![x.index], Some(Box::new(Normalize)), false)
    }

    /// sum_i w_i * items_i with one weight per item.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Var {
        assert_eq!(weights.len, items.len(), "one weight per item required");
        let item_len = items[0].len;
        let mut value = vec![0.0; item_len];
        for (i, item) in items.iter().enumerate() {
            assert_eq!(item.len, item_len, "weighted_sum item length mismatch");
            let wi = self.value(weights)[i];
            for (v, x) in value.iter_mut().zip(self.value(*item)) {
                *v += wi * x;
            }
        }
        let mut parents = Vec::with_capacity(1 + items.len());
        parents.push(weights.index);
        parents.extend(items.iter().map(|i| i.index));
        self.push(value, parents, Some(Box::new(WeightedSum { n_items: items.len() })), false)
    }

    /// z_k = sum over triples (i,j,k,c) of c * a_i * b_j.
    pub fn sparse_bilinear(
        &mut self,
        a: Var,
        b: Var,
        triples: Arc<Vec<(usize, usize, usize, f64)>>,
        out_len: usize,
    ) -> Var {
        let mut value = vec![0.0; out_len];
        {
            let (va, vb) = (self.value(a), self.value(b));
            for &(i, j, k, c) in triples.iter() {
                value[k] += c * va[i] * vb[j];
            }
        }
        self.push(
            value,
            vec![a.index, b.index],
            Some(Box::new(SparseBilinear { triples })),
            false,
        )
    }

    /// Block-diagonal channel mixing; see [`BlockMixLinear`].
    pub fn block_mix_linear(
        &mut self,
        w: Var,
        x: Var,
        block_of: Arc<Vec<usize>>,
        n_blocks: usize,
        in_channels: usize,
        out_channels: usize,
    ) -> Var {
        let dim = block_of.len();
        assert_eq!(x.len, in_channels * dim, "block mix input shape mismatch");
        assert_eq!(w.len, n_blocks * out_channels * in_channels, "block mix weight mismatch");
        let mut value = vec![0.0; out_channels * dim];
        {
            let (wv, xv) = (self.value(w), self.value(x));
            for d in 0..dim {
                let blk = block_of[d];
                for co in 0..out_channels {
                    let wrow = blk * out_channels * in_channels + co * in_channels;
                    let mut acc = 0.0;
                    for ci in 0..in_channels {
                        acc += wv[wrow + ci] * xv[ci * dim + d];
                    }
                    value[co * dim + d] = acc;
                }
            }
        }
        self.push(
            value,
            vec![w.index, x.index],
            Some(Box::new(BlockMixLinear { block_of, n_blocks, in_channels, out_channels })),
            false,
        )
    }

    /// Gated nonlinearity; see [`GradeGate`]. `a` and `b` hold one gate
    /// slope/offset per (channel, block).
    pub fn grade_gate(
        &mut self,
        x: Var,
        a: Var,
        b: Var,
        block_of: Arc<Vec<usize>>,
        n_blocks: usize,
        channels: usize,
    ) -> Var {
        let dim = block_of.len();
        assert_eq!(x.len, channels * dim, "grade gate input mismatch");
        assert_eq!(a.len, channels * n_blocks, "grade gate slope mismatch");
        assert_eq!(b.len, channels * n_blocks, "grade gate offset mismatch");
        let mut value = vec![0.0; x.len];
        {
            let (xv, av, bv) = (self.value(x), self.value(a), self.value(b));
            for c in 0..channels {
                let s = xv[c * dim];
                for d in 0..dim {
                    let beta = block_of[d];
                    let u = av[c * n_blocks + beta] * s + bv[c * n_blocks + beta];
                    value[c * dim + d] = xv[c * dim + d] * sigmoid(u);
                }
            }
        }
        self.push(
            value,
            vec![x.index, a.index, b.index],
            Some(Box::new(GradeGate { block_of, n_blocks, channels })),
            false,
        )
    }

    /// Sinusoidal features of a coordinate vector; output length is
    /// 2 * n_freqs * x.len().
    pub fn sincos(&mut self, x: Var, n_freqs: usize, scale: f64) -> Var {
        let xs = self.value(x);
        let mut value = Vec::with_capacity(2 * n_freqs * xs.len());
        for f in 0..n_freqs {
            let rate = (2.0f64).powi(f as i32) * std::f64::consts::PI / scale;
            for &xa in xs.iter() {
                let (s, c) = (rate * xa).sin_cos();
                value.push(s);
                value.push(c);
            }
        }
        self.push(value, vec![x.index], Some(Box::new(SinCos { n_freqs, scale })), false)
    }

    /// Separable 2D convolution of an h x w grid with a fixed kernel.
    pub fn conv_sep2d(&mut self, x: Var, h: usize, w: usize, kernel: Arc<Vec<f64>>) -> Var {
        assert_eq!(x.len, h * w, "conv input shape mismatch");
        assert_eq!(kernel.len() % 2, 1, "kernel length must be odd");
        let value = conv_sep_forward(self.value(x), h, w, &kernel);
        self.push(value, vec![x.index], Some(Box::new(ConvSep2d { h, w, kernel })), false)
    }

    /// Record a custom operation with a hand-written backward pass.
    pub fn custom(&mut self, op: Box<dyn CustomOp>, parents: &[Var]) -> Var {
        let inputs: Vec<&[f64]> = parents.iter().map(|p| self.value(*p)).collect();
        let value = op.forward(&inputs);
        // `inputs` borrows self, so compute before pushing.
        let parent_indices = parents.iter().map(|p| p.index).collect();
        self.push(value, parent_indices, Some(Box::new(CustomAdapter(op))), false)
    }
}
