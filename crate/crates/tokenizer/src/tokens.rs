//! Token construction: anchors, the transmitter, and the learned global
//! token, all as tape variables so gradients reach both the scene and the
//! tokenizer parameters.

use crate::config::{TokenizerConfig, AUX_FLAG_ANCHOR, AUX_FLAG_TX};
use crate::params::TokenizerVars;
use crate::TokenizerError;
use autodiff::{Tape, Var};
use ga_core::BLADE_COUNT;
use std::sync::Arc;

/// One token on the tape: `mv_channels * 16` multivector coefficients in
/// channel-major order, plus auxiliary scalars.
#[derive(Debug, Clone, Copy)]
pub struct TokenVar {
    pub mv: Var,
    pub aux: Var,
}

/// Blade index of the scalar coefficient within a channel.
const SCALAR: usize = 0;
/// Blade indices of the spatial vector coefficients.
const SPATIAL: [usize; 3] = [1, 2, 3];
/// Blade index of the degenerate vector coefficient.
const E4: usize = 4;

/// Builds a token whose first channel encodes a position as a homogeneous
/// point (spatial grade-1 coefficients plus a unit e4 marker); remaining
/// channels start empty.
fn position_token(
    tape: &mut Tape,
    config: &TokenizerConfig,
    position: Var,
    aux: Var,
) -> TokenVar {
    debug_assert_eq!(position.len(), 3);
    let zeros_head = tape.constant(vec![0.0; SPATIAL[0] - SCALAR]); // scalar slot
    let e4_marker = tape.constant(vec![1.0]);
    let zeros_tail = tape.constant(vec![0.0; BLADE_COUNT - E4 - 1]);
    let mut parts = vec![zeros_head, position, e4_marker, zeros_tail];
    if config.mv_channels > 1 {
        parts.push(tape.constant(vec![0.0; (config.mv_channels - 1) * BLADE_COUNT]));
    }
    let mv = tape.concat(&parts);
    TokenVar { mv, aux }
}

/// Assembles the token sequence `[global, transmitter, anchors...]`.
///
/// `positions` is the scene's flattened position leaf (3N), `opacities` the
/// opacity leaf (N); `anchors` indexes primitives. The transmitter position
/// arrives as its own 3-long var so a caller may treat it as constant or
/// learnable.
pub fn tokenize_anchors(
    tape: &mut Tape,
    vars: &TokenizerVars,
    config: &TokenizerConfig,
    positions: Var,
    opacities: Var,
    anchors: &[usize],
    tx_position: Var,
) -> Result<Vec<TokenVar>, TokenizerError> {
    config.validate()?;
    if anchors.is_empty() {
        return Err(TokenizerError::EmptyAnchorSet);
    }
    let primitive_count = opacities.len();
    if positions.len() != 3 * primitive_count {
        return Err(TokenizerError::LengthMismatch {
            what: "positions",
            expected: 3 * primitive_count,
            got: positions.len(),
        });
    }
    if let Some(&bad) = anchors.iter().find(|&&a| a >= primitive_count) {
        return Err(TokenizerError::AnchorOutOfRange { index: bad, count: primitive_count });
    }
    let n_s = config.aux_scalars;
    let mut tokens = Vec::with_capacity(anchors.len() + 2);

    // Global token: learned invariant-blade content scattered into the
    // full channel layout. The scatter is a fixed gather from a padded
    // vector: [learned coefficients, one zero] where every non-invariant
    // slot reads the zero.
    let zero_pad = tape.constant(vec![0.0]);
    let padded = tape.concat(&[vars.cls_invariant, zero_pad]);
    let learned_len = tape.value(vars.cls_invariant).len();
    let mut gather_map = Vec::with_capacity(config.mv_channels * BLADE_COUNT);
    for channel in 0..config.mv_channels {
        for blade in 0..BLADE_COUNT {
            let slot = crate::config::INVARIANT_BLADES.iter().position(|&b| b == blade);
            gather_map.push(match slot {
                Some(s) => channel * crate::config::INVARIANT_BLADES.len() + s,
                None => learned_len, // the zero pad
            });
        }
    }
    let cls_mv = tape.gather(padded, Arc::new(gather_map));
    tokens.push(TokenVar { mv: cls_mv, aux: vars.cls_aux });

    // Transmitter token.
    let mut tx_aux = vec![0.0; n_s];
    tx_aux[AUX_FLAG_TX] = 1.0;
    let tx_aux = tape.constant(tx_aux);
    tokens.push(position_token(tape, config, tx_position, tx_aux));

    // Anchor tokens.
    for &anchor in anchors {
        let pos = tape.gather(
            positions,
            Arc::new(vec![3 * anchor, 3 * anchor + 1, 3 * anchor + 2]),
        );
        let opacity = tape.gather(opacities, Arc::new(vec![anchor]));
        let mut flag_tail = vec![0.0; n_s - 1];
        flag_tail[AUX_FLAG_ANCHOR - 1] = 1.0;
        let tail = tape.constant(flag_tail);
        let aux = tape.concat(&[opacity, tail]);
        tokens.push(position_token(tape, config, pos, aux));
    }
    Ok(tokens)
}
