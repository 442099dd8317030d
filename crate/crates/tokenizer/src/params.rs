//! Learned parameters of the tokenizer: one set of channel-mixing and gate
//! tensors per attention block, plus the learned global token.

use crate::config::{TokenizerConfig, BLADE_BLOCKS, INVARIANT_BLADES};
use autodiff::{Tape, Var};
use rand::Rng;

/// Parameters of one attention + geometric-product block.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockParams {
    /// Equivariant channel mixers for queries, keys and values, each laid
    /// out `[blade block][out channel][in channel]`.
    pub query_mix: Vec<f64>,
    pub key_mix: Vec<f64>,
    pub value_mix: Vec<f64>,
    /// Plain affine map producing auxiliary-scalar values for attention.
    pub aux_value_w: Vec<f64>,
    pub aux_value_b: Vec<f64>,
    /// Mixers feeding the channelwise geometric product.
    pub pair_a_mix: Vec<f64>,
    pub pair_b_mix: Vec<f64>,
    /// Mixer fusing [attended state, product] (2 n_c channels) back to n_c.
    pub fuse_mix: Vec<f64>,
    /// Scalar-conditioned gate, one slope/offset per (channel, blade block).
    pub gate_slope: Vec<f64>,
    pub gate_offset: Vec<f64>,
    /// Two-layer auxiliary-scalar MLP applied per token after attention.
    pub aux_w1: Vec<f64>,
    pub aux_b1: Vec<f64>,
    pub aux_w2: Vec<f64>,
    pub aux_b2: Vec<f64>,
}

/// Full parameter set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TokenizerParams {
    /// Learned global-token content on the rotation-invariant blades,
    /// laid out `[channel][invariant blade]`.
    pub cls_invariant: Vec<f64>,
    /// Learned global-token auxiliary scalars.
    pub cls_aux: Vec<f64>,
    pub blocks: Vec<BlockParams>,
}

fn uniform<R: Rng>(rng: &mut R, len: usize, bound: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
}

fn mixer<R: Rng>(rng: &mut R, in_c: usize, out_c: usize) -> Vec<f64> {
    uniform(rng, BLADE_BLOCKS * out_c * in_c, 1.0 / (in_c as f64).sqrt())
}

impl TokenizerParams {
    /// Fresh parameters: mixers at uniform(±1/√fan_in), gates biased open,
    /// the global token with unit scalar grade.
    pub fn init(config: &TokenizerConfig, rng: &mut impl Rng) -> Self {
        let n_c = config.mv_channels;
        let n_s = config.aux_scalars;
        let blocks = (0..config.blocks)
            .map(|_| BlockParams {
                query_mix: mixer(rng, n_c, n_c),
                key_mix: mixer(rng, n_c, n_c),
                value_mix: mixer(rng, n_c, n_c),
                aux_value_w: uniform(rng, n_s * n_s, 1.0 / (n_s as f64).sqrt()),
                aux_value_b: vec![0.0; n_s],
                pair_a_mix: mixer(rng, n_c, n_c),
                pair_b_mix: mixer(rng, n_c, n_c),
                fuse_mix: mixer(rng, 2 * n_c, n_c),
                gate_slope: uniform(rng, n_c * BLADE_BLOCKS, 0.1),
                gate_offset: vec![1.0; n_c * BLADE_BLOCKS],
                aux_w1: uniform(rng, n_s * n_s, 1.0 / (n_s as f64).sqrt()),
                aux_b1: vec![0.0; n_s],
                aux_w2: uniform(rng, n_s * n_s, 1.0 / (n_s as f64).sqrt()),
                aux_b2: vec![0.0; n_s],
            })
            .collect();
        let mut cls_invariant = vec![0.0; INVARIANT_BLADES.len() * n_c];
        for channel in 0..n_c {
            cls_invariant[INVARIANT_BLADES.len() * channel] = 1.0; // scalar grade
        }
        let mut cls_aux = vec![0.0; n_s];
        cls_aux[crate::config::AUX_FLAG_CLS] = 1.0;
        Self { cls_invariant, cls_aux, blocks }
    }

    /// Mutable views over every tensor, in a fixed order, for optimizers
    /// and serialization.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        let mut out: Vec<(&'static str, &mut Vec<f64>)> = vec![
            ("cls_invariant", &mut self.cls_invariant),
            ("cls_aux", &mut self.cls_aux),
        ];
        for block in &mut self.blocks {
            out.push(("query_mix", &mut block.query_mix));
            out.push(("key_mix", &mut block.key_mix));
            out.push(("value_mix", &mut block.value_mix));
            out.push(("aux_value_w", &mut block.aux_value_w));
            out.push(("aux_value_b", &mut block.aux_value_b));
            out.push(("pair_a_mix", &mut block.pair_a_mix));
            out.push(("pair_b_mix", &mut block.pair_b_mix));
            out.push(("fuse_mix", &mut block.fuse_mix));
            out.push(("gate_slope", &mut block.gate_slope));
            out.push(("gate_offset", &mut block.gate_offset));
            out.push(("aux_w1", &mut block.aux_w1));
            out.push(("aux_b1", &mut block.aux_b1));
            out.push(("aux_w2", &mut block.aux_w2));
            out.push(("aux_b2", &mut block.aux_b2));
        }
        out
    }

    /// Read-only tensor views in the same order as [`Self::tensors_mut`].
    pub fn tensors(&self) -> Vec<(&'static str, &Vec<f64>)> {
        let mut out: Vec<(&'static str, &Vec<f64>)> =
            vec![("cls_invariant", &self.cls_invariant), ("cls_aux", &self.cls_aux)];
        for block in &self.blocks {
            out.push(("query_mix", &block.query_mix));
            out.push(("key_mix", &block.key_mix));
            out.push(("value_mix", &block.value_mix));
            out.push(("aux_value_w", &block.aux_value_w));
            out.push(("aux_value_b", &block.aux_value_b));
            out.push(("pair_a_mix", &block.pair_a_mix));
            out.push(("pair_b_mix", &block.pair_b_mix));
            out.push(("fuse_mix", &block.fuse_mix));
            out.push(("gate_slope", &block.gate_slope));
            out.push(("gate_offset", &block.gate_offset));
            out.push(("aux_w1", &block.aux_w1));
            out.push(("aux_b1", &block.aux_b1));
            out.push(("aux_w2", &block.aux_w2));
            out.push(("aux_b2", &block.aux_b2));
        }
        out
    }

    /// Total scalar parameter count.
    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tape leaves mirroring [`BlockParams`].
#[derive(Debug, Clone, Copy)]
pub struct BlockVars {
    pub query_mix: Var,
    pub key_mix: Var,
    pub value_mix: Var,
    pub aux_value_w: Var,
    pub aux_value_b: Var,
    pub pair_a_mix: Var,
    pub pair_b_mix: Var,
    pub fuse_mix: Var,
    pub gate_slope: Var,
    pub gate_offset: Var,
    pub aux_w1: Var,
    pub aux_b1: Var,
    pub aux_w2: Var,
    pub aux_b2: Var,
}

/// Tape leaves mirroring [`TokenizerParams`]. Gradients land on these.
#[derive(Debug, Clone)]
pub struct TokenizerVars {
    pub cls_invariant: Var,
    pub cls_aux: Var,
    pub blocks: Vec<BlockVars>,
}

impl TokenizerVars {
    /// Registers every parameter tensor as a tape leaf.
    pub fn leaves(tape: &mut Tape, params: &TokenizerParams) -> Self {
        Self {
            cls_invariant: tape.leaf(params.cls_invariant.clone()),
            cls_aux: tape.leaf(params.cls_aux.clone()),
            blocks: params
                .blocks
                .iter()
                .map(|b| BlockVars {
                    query_mix: tape.leaf(b.query_mix.clone()),
                    key_mix: tape.leaf(b.key_mix.clone()),
                    value_mix: tape.leaf(b.value_mix.clone()),
                    aux_value_w: tape.leaf(b.aux_value_w.clone()),
                    aux_value_b: tape.leaf(b.aux_value_b.clone()),
                    pair_a_mix: tape.leaf(b.pair_a_mix.clone()),
                    pair_b_mix: tape.leaf(b.pair_b_mix.clone()),
                    fuse_mix: tape.leaf(b.fuse_mix.clone()),
                    gate_slope: tape.leaf(b.gate_slope.clone()),
                    gate_offset: tape.leaf(b.gate_offset.clone()),
                    aux_w1: tape.leaf(b.aux_w1.clone()),
                    aux_b1: tape.leaf(b.aux_b1.clone()),
                    aux_w2: tape.leaf(b.aux_w2.clone()),
                    aux_b2: tape.leaf(b.aux_b2.clone()),
                })
                .collect(),
        }
    }

    /// Leaf vars in [`TokenizerParams::tensors`] order.
    pub fn leaf_list(&self) -> Vec<Var> {
        let mut out = vec![self.cls_invariant, self.cls_aux];
        for b in &self.blocks {
            out.extend([
                b.query_mix,
                b.key_mix,
                b.value_mix,
                b.aux_value_w,
                b.aux_value_b,
                b.pair_a_mix,
                b.pair_b_mix,
                b.fuse_mix,
                b.gate_slope,
                b.gate_offset,
                b.aux_w1,
                b.aux_b1,
                b.aux_w2,
                b.aux_b2,
            ]);
        }
        out
    }
}
