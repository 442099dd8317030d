//! Dense layers and tanh MLP trunks with optional input-skip connections.

use crate::MappingError;
use autodiff::{Tape, Var};
use rand::Rng;

/// One affine layer: row-major `out_dim x in_dim` weights plus a bias.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DenseLayer {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    /// Uniform(-1/sqrt(in_dim), +1/sqrt(in_dim)) weights, zero bias.
    pub fn init(rng: &mut impl Rng, in_dim: usize, out_dim: usize) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: (0..out_dim * in_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// All-zero layer, used for heads that must start as the identity
    /// update.
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { weight: vec![0.0; out_dim * in_dim], bias: vec![0.0; out_dim], in_dim, out_dim }
    }
}

/// A stack of dense layers with tanh activations. Layers listed in
/// `skip_at` receive the trunk's own input concatenated onto the previous
/// activation; when `linear_output` is set the last layer skips its
/// activation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
    pub skip_at: Vec<usize>,
    pub linear_output: bool,
}

impl MlpParams {
    /// Hidden trunk of `depth` tanh layers, optionally capped by a linear
    /// output layer of `output` units.
    pub fn init(
        rng: &mut impl Rng,
        input_dim: usize,
        hidden: usize,
        depth: usize,
        output: Option<usize>,
        skip_at: Vec<usize>,
    ) -> Self {
        let mut layers = Vec::with_capacity(depth + output.is_some() as usize);
        let mut prev = input_dim;
        for layer in 0..depth {
            let in_dim = prev + if skip_at.contains(&layer) { input_dim } else { 0 };
            layers.push(DenseLayer::init(rng, in_dim, hidden));
            prev = hidden;
        }
        if let Some(out) = output {
            layers.push(DenseLayer::init(rng, prev, out));
        }
        Self { layers, skip_at, linear_output: output.is_some() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Checks layer chaining against an input of `input_dim`, counting the
    /// extra skip width on flagged layers.
    pub fn validate(&self, input_dim: usize) -> Result<(), MappingError> {
        if self.layers.is_empty() {
            return Err(MappingError::InvalidConfig("mlp needs at least one layer"));
        }
        if self.skip_at.contains(&0) {
            return Err(MappingError::InvalidConfig(
                "layer 0 already reads the input; skip flags start at layer 1",
            ));
        }
        let mut prev = input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            let expected = prev + if self.skip_at.contains(&i) { input_dim } else { 0 };
            if layer.in_dim != expected {
                return Err(MappingError::DimensionMismatch {
                    what: "mlp layer input",
                    expected,
                    got: layer.in_dim,
                });
            }
            if layer.weight.len() != layer.out_dim * layer.in_dim
                || layer.bias.len() != layer.out_dim
            {
                return Err(MappingError::DimensionMismatch {
                    what: "mlp layer parameter size",
                    expected: layer.out_dim * layer.in_dim,
                    got: layer.weight.len(),
                });
            }
            prev = layer.out_dim;
        }
        Ok(())
    }
}

/// Tape handles for one MLP's parameters, layer by layer.
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub layers: Vec<(Var, Var)>,
}

impl MlpVars {
    pub fn leaves(tape: &mut Tape, mlp: &MlpParams) -> Self {
        let layers = mlp
            .layers
            .iter()
            .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
            .collect();
        Self { layers }
    }
}

/// Runs the trunk on the tape. The caller must have validated `mlp`
/// against the input length; this only wires operations.
pub fn mlp_on_tape(tape: &mut Tape, vars: &MlpVars, mlp: &MlpParams, input: Var) -> Var {
    let mut h = input;
    let last = mlp.layers.len() - 1;
    for (i, (layer, &(w, b))) in mlp.layers.iter().zip(&vars.layers).enumerate() {
        let x = if mlp.skip_at.contains(&i) { tape.concat(&[h, input]) } else { h };
        let z = tape.linear(w, b, x, layer.out_dim, layer.in_dim);
        h = if i == last && mlp.linear_output { z } else { tape.tanh(z) };
    }
    h
}
