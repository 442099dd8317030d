//! Full encoder: tokenize, run the block stack, read out the CLS feature.

use crate::attention::encoder_block;
use crate::config::{TokenizerConfig, INVARIANT_BLADES};
use crate::embed::embed_euclidean;
use crate::params::{TokenizerParams, TokenizerVars};
use crate::tokens::{tokenize_anchors, TokenVar};
use crate::TokenizerError;
use autodiff::{Tape, Var};
use ga_core::BLADE_COUNT;
use scene::Scene;
use std::sync::Arc;

/// Everything the encoder produces on a tape. `tokens` keeps the final
/// multivector/auxiliary state of every token (CLS first) so equivariance
/// can be checked on the raw channels; `cls_feature` is the invariant
/// readout used downstream.
#[derive(Debug, Clone)]
pub struct EncodedScene {
    pub tokens: Vec<TokenVar>,
    pub cls_feature: Var,
}

/// Conditioning features for the mapping network. `cls` is a single vector
/// shared by — broadcast unchanged to — every primitive; `e_x` holds one
/// Euclidean embedding per primitive, and `e_tx` the transmitter's.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewOutput {
    pub cls: Vec<f64>,
    pub e_x: Vec<Vec<f64>>,
    pub e_tx: Vec<f64>,
}

/// Differentiable encoder forward. `positions` is the flattened 3N position
/// array of the whole primitive set, `opacities` its N opacities; `anchors`
/// selects which primitives become tokens. Returns the final token states
/// and the CLS readout: the scalar and e4 coefficients of every CLS channel
/// followed by the CLS auxiliary scalars.
pub fn encode_on_tape(
    tape: &mut Tape,
    vars: &TokenizerVars,
    config: &TokenizerConfig,
    positions: Var,
    opacities: Var,
    anchors: &[usize],
    tx_position: Var,
) -> Result<EncodedScene, TokenizerError> {
    let mut tokens =
        tokenize_anchors(tape, vars, config, positions, opacities, anchors, tx_position)?;
    for block in &vars.blocks {
        tokens = encoder_block(tape, block, config, &tokens)?;
    }
    let cls = tokens[0];
    let mut readout = Vec::with_capacity(INVARIANT_BLADES.len() * config.mv_channels);
    for channel in 0..config.mv_channels {
        for &blade in INVARIANT_BLADES.iter() {
            readout.push(channel * BLADE_COUNT + blade);
        }
    }
    let invariant = tape.gather(cls.mv, Arc::new(readout));
    let cls_feature = tape.concat(&[invariant, cls.aux]);
    Ok(EncodedScene { tokens, cls_feature })
}

/// Plain (non-recording) encoder: runs the block stack on a throwaway tape
/// and packages the conditioning features. Anchors are the scene's own
/// highest-opacity selection.
pub fn encode(
    params: &TokenizerParams,
    config: &TokenizerConfig,
    scene: &Scene,
    tx: [f64; 3],
) -> Result<MultiViewOutput, TokenizerError> {
    config.validate()?;
    let m = scene.anchor_count.min(scene.len());
    if m == 0 {
        return Err(TokenizerError::EmptyAnchorSet);
    }
    let anchors = scene
        .select_anchors(m)
        .expect("anchor count clamped to primitive count");

    let mut tape = Tape::new();
    let vars = TokenizerVars::leaves(&mut tape, params);
    let mut flat = Vec::with_capacity(3 * scene.len());
    let mut opacities = Vec::with_capacity(scene.len());
    for p in &scene.primitives {
        flat.extend_from_slice(&p.position);
        opacities.push(p.opacity);
    }
    let positions = tape.leaf(flat);
    let opacities = tape.leaf(opacities);
    let tx_var = tape.leaf(tx.to_vec());
    let encoded =
        encode_on_tape(&mut tape, &vars, config, positions, opacities, &anchors, tx_var)?;

    let cls = tape.value(encoded.cls_feature).to_vec();
    let e_x = scene
        .primitives
        .iter()
        .map(|p| embed_euclidean(p.position, config.frequencies, config.embed_scale))
        .collect();
    let e_tx = embed_euclidean(tx, config.frequencies, config.embed_scale);
    Ok(MultiViewOutput { cls, e_x, e_tx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use scene::GaussianPrimitive;

    fn small_config() -> TokenizerConfig {
        TokenizerConfig { mv_channels: 2, aux_scalars: 4, blocks: 1, ..TokenizerConfig::default() }
    }

    fn random_scene(rng: &mut ChaCha20Rng, n: usize, anchors: usize) -> Scene {
        let primitives = (0..n)
            .map(|_| {
                let p = [
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ];
                GaussianPrimitive::isotropic(p, 0.2, rng.gen_range(0.1..0.9))
            })
            .collect();
        Scene { primitives, tx_position: [0.0, 0.0, 1.0], anchor_count: anchors }
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let scene = random_scene(&mut rng, 6, 4);
        let config = small_config();
        let params = TokenizerParams::init(&config, &mut rng);
        let a = encode(&params, &config, &scene, [1.0, 2.0, 0.5]).unwrap();
        let b = encode(&params, &config, &scene, [1.0, 2.0, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn output_shapes_match_the_configuration() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let scene = random_scene(&mut rng, 5, 3);
        let config = small_config();
        let params = TokenizerParams::init(&config, &mut rng);
        let out = encode(&params, &config, &scene, [0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out.cls.len(), config.cls_feature_dim());
        assert_eq!(out.e_x.len(), 5);
        assert!(out.e_x.iter().all(|e| e.len() == config.embed_dim()));
        assert_eq!(out.e_tx.len(), config.embed_dim());
        assert!(out.e_x.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn empty_scene_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let config = small_config();
        let params = TokenizerParams::init(&config, &mut rng);
        let scene = Scene { primitives: vec![], tx_position: [0.0; 3], anchor_count: 0 };
        assert_eq!(
            encode(&params, &config, &scene, [0.0; 3]),
            Err(TokenizerError::EmptyAnchorSet)
        );
    }

    #[test]
    fn token_count_is_anchors_plus_two() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let scene = random_scene(&mut rng, 8, 4);
        let config = small_config();
        let params = TokenizerParams::init(&config, &mut rng);
        let mut tape = Tape::new();
        let vars = TokenizerVars::leaves(&mut tape, &params);
        let mut flat = Vec::new();
        let mut op = Vec::new();
        for p in &scene.primitives {
            flat.extend_from_slice(&p.position);
            op.push(p.opacity);
        }
        let positions = tape.leaf(flat);
        let opacities = tape.leaf(op);
        let tx = tape.leaf(scene.tx_position.to_vec());
        let anchors = scene.select_anchors(4).unwrap();
        let encoded =
            encode_on_tape(&mut tape, &vars, &config, positions, opacities, &anchors, tx)
                .unwrap();
        assert_eq!(encoded.tokens.len(), 6);
        assert_eq!(
            tape.value(encoded.cls_feature).len(),
            2 * config.mv_channels + config.aux_scalars
        );
    }
}
