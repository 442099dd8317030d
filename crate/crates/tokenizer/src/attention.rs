//! Geometric-algebra attention and the full encoder block.
//!
//! Attention logits come from the invariant inner product — coefficients of
//! the degenerate (e4-carrying) blades are excluded, which is precisely what
//! keeps the logits unchanged when a spatial rotation acts on every token.
//! Values mix linearly under the resulting softmax weights, so the output
//! transforms exactly as the values do.

use crate::config::{TokenizerConfig, BLADE_BLOCKS, BLOCK_OF_COEFF};
use crate::params::BlockVars;
use crate::tokens::TokenVar;
use crate::TokenizerError;
use autodiff::{Tape, Var};
use ga_core::{CayleyTable, Signature, BLADE_COUNT, NONDEGENERATE_BLADES};
use std::sync::Arc;

/// Logit mask: per-channel offsets of the non-degenerate blade coefficients.
fn invariant_indices(mv_channels: usize) -> Arc<Vec<usize>> {
    let mut indices = Vec::with_capacity(mv_channels * NONDEGENERATE_BLADES.len());
    for channel in 0..mv_channels {
        for &blade in NONDEGENERATE_BLADES.iter() {
            indices.push(channel * BLADE_COUNT + blade);
        }
    }
    Arc::new(indices)
}

fn block_partition(mv_channels: usize) -> Arc<Vec<usize>> {
    let _ = mv_channels;
    Arc::new(BLOCK_OF_COEFF.to_vec())
}

/// Single-head attention over tokens: weights from the invariant inner
/// product of query/key multivectors (softmax over keys, scaled by
/// 1/sqrt(8 n_c)), applied to both the multivector and auxiliary streams.
/// The q/k/v sequences must be projections of the same token list.
pub fn ga_attention(
    tape: &mut Tape,
    queries: &[TokenVar],
    keys: &[TokenVar],
    values: &[TokenVar],
    mv_channels: usize,
) -> Result<Vec<TokenVar>, TokenizerError> {
    if queries.len() != keys.len() || keys.len() != values.len() {
        return Err(TokenizerError::LengthMismatch {
            what: "attention sequences",
            expected: queries.len(),
            got: keys.len().max(values.len()),
        });
    }
    if queries.is_empty() {
        return Err(TokenizerError::EmptyAnchorSet);
    }
    let mask = invariant_indices(mv_channels);
    let scale = 1.0 / ((NONDEGENERATE_BLADES.len() * mv_channels) as f64).sqrt();
    let value_mv: Vec<Var> = values.iter().map(|t| t.mv).collect();
    let value_aux: Vec<Var> = values.iter().map(|t| t.aux).collect();
    let mut out = Vec::with_capacity(queries.len());
    for query in queries {
        let logits: Vec<Var> = keys
            .iter()
            .map(|key| {
                let raw = tape.index_dot(query.mv, key.mv, mask.clone());
                tape.scale(raw, scale)
            })
            .collect();
        let stacked = tape.concat(&logits);
        let weights = tape.softmax(stacked);
        let mv = tape.weighted_sum(weights, &value_mv);
        let aux = tape.weighted_sum(weights, &value_aux);
        out.push(TokenVar { mv, aux });
    }
    Ok(out)
}

/// One encoder block: equivariant q/k/v projections, attention with a
/// residual, then a geometric-product mixer with a scalar-conditioned gate
/// and an auxiliary-scalar MLP, each with residuals.
pub fn encoder_block(
    tape: &mut Tape,
    block: &BlockVars,
    config: &TokenizerConfig,
    tokens: &[TokenVar],
) -> Result<Vec<TokenVar>, TokenizerError> {
    let n_c = config.mv_channels;
    let n_s = config.aux_scalars;
    let partition = block_partition(n_c);
    let cayley = Arc::new(
        CayleyTable::get(Signature::euclidean_pga()).nonzero_triples(),
    );

    // Projections.
    let mut queries = Vec::with_capacity(tokens.len());
    let mut keys = Vec::with_capacity(tokens.len());
    let mut values = Vec::with_capacity(tokens.len());
    for token in tokens {
        let q = tape.block_mix_linear(block.query_mix, token.mv, partition.clone(), BLADE_BLOCKS, n_c, n_c);
        let k = tape.block_mix_linear(block.key_mix, token.mv, partition.clone(), BLADE_BLOCKS, n_c, n_c);
        let v = tape.block_mix_linear(block.value_mix, token.mv, partition.clone(), BLADE_BLOCKS, n_c, n_c);
        let v_aux = tape.linear(block.aux_value_w, block.aux_value_b, token.aux, n_s, n_s);
        queries.push(TokenVar { mv: q, aux: token.aux });
        keys.push(TokenVar { mv: k, aux: token.aux });
        values.push(TokenVar { mv: v, aux: v_aux });
    }
    let attended = ga_attention(tape, &queries, &keys, &values, n_c)?;

    // Residual around attention.
    let mut state: Vec<TokenVar> = tokens
        .iter()
        .zip(&attended)
        .map(|(t, a)| TokenVar { mv: tape.add(t.mv, a.mv), aux: tape.add(t.aux, a.aux) })
        .collect();

    // Geometric-product mixer with gate, per token.
    for token in state.iter_mut() {
        let a = tape.block_mix_linear(block.pair_a_mix, token.mv, partition.clone(), BLADE_BLOCKS, n_c, n_c);
        let b = tape.block_mix_linear(block.pair_b_mix, token.mv, partition.clone(), BLADE_BLOCKS, n_c, n_c);
        let mut products = Vec::with_capacity(n_c);
        for channel in 0..n_c {
            let ac = tape.slice(a, channel * BLADE_COUNT, BLADE_COUNT);
            let bc = tape.slice(b, channel * BLADE_COUNT, BLADE_COUNT);
            products.push(tape.sparse_bilinear(ac, bc, cayley.clone(), BLADE_COUNT));
        }
        let product = tape.concat(&products);
        let fused_in = tape.concat(&[token.mv, product]);
        let fused = tape.block_mix_linear(
            block.fuse_mix,
            fused_in,
            partition.clone(),
            BLADE_BLOCKS,
            2 * n_c,
            n_c,
        );
        let gated = tape.grade_gate(
            fused,
            block.gate_slope,
            block.gate_offset,
            partition.clone(),
            BLADE_BLOCKS,
            n_c,
        );
        token.mv = tape.add(token.mv, gated);

        let h = tape.linear(block.aux_w1, block.aux_b1, token.aux, n_s, n_s);
        let h = tape.tanh(h);
        let h = tape.linear(block.aux_w2, block.aux_b2, h, n_s, n_s);
        token.aux = tape.add(token.aux, h);
    }
    Ok(state)
}
