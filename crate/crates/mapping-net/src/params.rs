//! Architecture configuration and the full parameter set.

use crate::mlp::{DenseLayer, MlpParams, MlpVars};
use crate::MappingError;
use autodiff::{Tape, Var};
use rand::Rng;
use scene::SIGNAL_DIM;

/// Layer sizing for both branches and the heads. Embedding widths must
/// match the tokenizer outputs this network is paired with.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MappingConfig {
    /// Width of one Euclidean embedding (transmitter or query position).
    pub embed_dim: usize,
    /// Width of the tokenizer's invariant scene feature.
    pub cls_dim: usize,
    /// Hidden width of both branch trunks.
    pub hidden: usize,
    /// Hidden tanh layers in the attenuation trunk.
    pub attenuation_depth: usize,
    /// Attenuation layer (0-based) that re-reads the trunk input.
    pub skip_layer: usize,
    /// Hidden tanh layers in the signal trunk.
    pub signal_depth: usize,
    /// Hidden width of the rotation/scaling/signal heads.
    pub head_hidden: usize,
    /// Output width of the signal field and signal head.
    pub signal_dim: usize,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            embed_dim: 36,
            cls_dim: 32,
            hidden: 128,
            attenuation_depth: 4,
            skip_layer: 2,
            signal_depth: 3,
            head_hidden: 64,
            signal_dim: SIGNAL_DIM,
        }
    }
}

impl MappingConfig {
    /// Attenuation trunk input: [e_tx, e_x, cls].
    pub fn attenuation_input(&self) -> usize {
        2 * self.embed_dim + self.cls_dim
    }

    /// Signal trunk input: [f, e_tx, e_x, cls].
    pub fn signal_input(&self) -> usize {
        self.hidden + self.attenuation_input()
    }

    /// Residual-head input: [f, xi].
    pub fn head_input(&self) -> usize {
        self.hidden + self.signal_dim
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        if self.embed_dim == 0 || self.cls_dim == 0 || self.hidden == 0 || self.head_hidden == 0 {
            return Err(MappingError::InvalidConfig("widths must be positive"));
        }
        if self.attenuation_depth < 2 || self.signal_depth == 0 {
            return Err(MappingError::InvalidConfig(
                "attenuation needs at least two layers, signal at least one",
            ));
        }
        if self.skip_layer == 0 || self.skip_layer >= self.attenuation_depth {
            return Err(MappingError::InvalidConfig(
                "skip layer must name a hidden layer after the first",
            ));
        }
        if self.signal_dim == 0 {
            return Err(MappingError::InvalidConfig("signal_dim must be positive"));
        }
        Ok(())
    }
}

/// All learnable parameters: two trunks, the attenuation output, three
/// residual heads, and the scalar opacity head.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MappingParams {
    pub attenuation: MlpParams,
    pub delta_head: DenseLayer,
    pub signal: MlpParams,
    pub rotation_head: MlpParams,
    pub scaling_head: MlpParams,
    pub signal_head: MlpParams,
    pub attn_head: DenseLayer,
}

impl MappingParams {
    /// Trunks draw uniform(-1/sqrt(fan_in), ..) weights; every residual
    /// head's output layer starts at zero so the initial network applies
    /// no correction to the scene.
    pub fn init(config: &MappingConfig, rng: &mut impl Rng) -> Self {
        let head = |rng: &mut _, out: usize| {
            let mut mlp = MlpParams::init(
                rng,
                config.head_input(),
                config.head_hidden,
                1,
                Some(out),
                vec![],
            );
            let last = mlp.layers.len() - 1;
            mlp.layers[last] = DenseLayer::zeros(config.head_hidden, out);
            mlp
        };
        Self {
            attenuation: MlpParams::init(
                rng,
                config.attenuation_input(),
                config.hidden,
                config.attenuation_depth,
                None,
                vec![config.skip_layer],
            ),
            delta_head: DenseLayer::init(rng, config.hidden, 1),
            signal: MlpParams::init(
                rng,
                config.signal_input(),
                config.hidden,
                config.signal_depth,
                Some(config.signal_dim),
                vec![],
            ),
            rotation_head: head(rng, 4),
            scaling_head: head(rng, 3),
            signal_head: head(rng, config.signal_dim),
            attn_head: DenseLayer::zeros(config.hidden, 1),
        }
    }

    pub fn validate(&self, config: &MappingConfig) -> Result<(), MappingError> {
        config.validate()?;
        self.attenuation.validate(config.attenuation_input())?;
        self.signal.validate(config.signal_input())?;
        self.rotation_head.validate_head(config.head_input(), 4)?;
        self.scaling_head.validate_head(config.head_input(), 3)?;
        self.signal_head.validate_head(config.head_input(), config.signal_dim)?;
        if self.attenuation.output_dim() != config.hidden {
            return Err(MappingError::DimensionMismatch {
                what: "attenuation trunk output",
                expected: config.hidden,
                got: self.attenuation.output_dim(),
            });
        }
        if self.signal.output_dim() != config.signal_dim {
            return Err(MappingError::DimensionMismatch {
                what: "signal trunk output",
                expected: config.signal_dim,
                got: self.signal.output_dim(),
            });
        }
        if self.delta_head.in_dim != config.hidden || self.delta_head.out_dim != 1 {
            return Err(MappingError::DimensionMismatch {
                what: "delta head",
                expected: config.hidden,
                got: self.delta_head.in_dim,
            });
        }
        if self.attn_head.in_dim != config.hidden || self.attn_head.out_dim != 1 {
            return Err(MappingError::DimensionMismatch {
                what: "attn head",
                expected: config.hidden,
                got: self.attn_head.in_dim,
            });
        }
        Ok(())
    }

    /// Flat, stably ordered view of every parameter tensor (optimizer
    /// state and checkpoints key off this order).
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        let mlps = [
            &mut self.attenuation,
            &mut self.signal,
            &mut self.rotation_head,
            &mut self.scaling_head,
            &mut self.signal_head,
        ];
        for mlp in mlps {
            for layer in &mut mlp.layers {
                out.push(&mut layer.weight);
                out.push(&mut layer.bias);
            }
        }
        out.push(&mut self.delta_head.weight);
        out.push(&mut self.delta_head.bias);
        out.push(&mut self.attn_head.weight);
        out.push(&mut self.attn_head.bias);
        out
    }

    pub fn len(&self) -> usize {
        let mlp_len = |m: &MlpParams| {
            m.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>()
        };
        mlp_len(&self.attenuation)
            + mlp_len(&self.signal)
            + mlp_len(&self.rotation_head)
            + mlp_len(&self.scaling_head)
            + mlp_len(&self.signal_head)
            + self.delta_head.weight.len()
            + self.delta_head.bias.len()
            + self.attn_head.weight.len()
            + self.attn_head.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl MlpParams {
    fn validate_head(&self, input_dim: usize, out: usize) -> Result<(), MappingError> {
        self.validate(input_dim)?;
        if self.output_dim() != out {
            return Err(MappingError::DimensionMismatch {
                what: "head output",
                expected: out,
                got: self.output_dim(),
            });
        }
        Ok(())
    }
}

/// Tape handles for the full parameter set, in `tensors_mut` order.
#[derive(Debug, Clone)]
pub struct MappingVars {
    pub attenuation: MlpVars,
    pub delta_head: (Var, Var),
    pub signal: MlpVars,
    pub rotation_head: MlpVars,
    pub scaling_head: MlpVars,
    pub signal_head: MlpVars,
    pub attn_head: (Var, Var),
}

impl MappingVars {
    pub fn leaves(tape: &mut Tape, params: &MappingParams) -> Self {
        let attenuation = MlpVars::leaves(tape, &params.attenuation);
        let signal = MlpVars::leaves(tape, &params.signal);
        let rotation_head = MlpVars::leaves(tape, &params.rotation_head);
        let scaling_head = MlpVars::leaves(tape, &params.scaling_head);
        let signal_head = MlpVars::leaves(tape, &params.signal_head);
        let delta_head = (
            tape.leaf(params.delta_head.weight.clone()),
            tape.leaf(params.delta_head.bias.clone()),
        );
        let attn_head = (
            tape.leaf(params.attn_head.weight.clone()),
            tape.leaf(params.attn_head.bias.clone()),
        );
        Self {
            attenuation,
            delta_head,
            signal,
            rotation_head,
            scaling_head,
            signal_head,
            attn_head,
        }
    }

    /// Leaves in the same order as [`MappingParams::tensors_mut`].
    pub fn leaf_list(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let mlps = [
            &self.attenuation,
            &self.signal,
            &self.rotation_head,
            &self.scaling_head,
            &self.signal_head,
        ];
        for mlp in mlps {
            for &(w, b) in &mlp.layers {
                out.push(w);
                out.push(b);
            }
        }
        out.push(self.delta_head.0);
        out.push(self.delta_head.1);
        out.push(self.attn_head.0);
        out.push(self.attn_head.1);
        out
    }
}
