//! Field evaluations: attenuation, signal, residual heads, and the
//! gradient contract. Every op exists twice — recorded on a tape for
//! training, and as a plain evaluation that runs a throwaway tape so both
//! paths share one arithmetic definition.

use crate::mlp::mlp_on_tape;
use crate::params::{MappingConfig, MappingParams, MappingVars};
use crate::MappingError;
use autodiff::{Tape, Var};
use scene::ResidualUpdate;

/// Residual-head outputs for one primitive, as tape handles.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub d_rotation: Var,
    pub d_scaling: Var,
    pub d_signal: Var,
    pub d_attn: Var,
}

/// Plain per-scene field outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutputs {
    pub delta: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub residuals: ResidualUpdate,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), MappingError> {
    if expected != got {
        return Err(MappingError::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

fn check_embeddings(
    config: &MappingConfig,
    e_tx: usize,
    e_x: usize,
    cls: usize,
) -> Result<(), MappingError> {
    check_len("transmitter embedding", config.embed_dim, e_tx)?;
    check_len("position embedding", config.embed_dim, e_x)?;
    check_len("scene feature", config.cls_dim, cls)
}

/// Attenuation branch: trunk on [e_tx, e_x, cls], sigmoid head for the
/// per-position attenuation, trunk activation returned as the geometric
/// feature `f`.
pub fn attenuation_on_tape(
    tape: &mut Tape,
    vars: &MappingVars,
    params: &MappingParams,
    config: &MappingConfig,
    e_tx: Var,
    e_x: Var,
    cls: Var,
) -> Result<(Var, Var), MappingError> {
    check_embeddings(config, e_tx.len(), e_x.len(), cls.len())?;
    let input = tape.concat(&[e_tx, e_x, cls]);
    let f = mlp_on_tape(tape, &vars.attenuation, &params.attenuation, input);
    let raw = tape.linear(vars.delta_head.0, vars.delta_head.1, f, 1, params.delta_head.in_dim);
    let delta = tape.sigmoid(raw);
    Ok((delta, f))
}

/// Signal branch: trunk on [f, e_tx, e_x, cls] producing the SH-shaped
/// signal representation.
pub fn signal_on_tape(
    tape: &mut Tape,
    vars: &MappingVars,
    params: &MappingParams,
    config: &MappingConfig,
    f: Var,
    e_tx: Var,
    e_x: Var,
    cls: Var,
) -> Result<Var, MappingError> {
    check_embeddings(config, e_tx.len(), e_x.len(), cls.len())?;
    check_len("geometric feature", config.hidden, f.len())?;
    let input = tape.concat(&[f, e_tx, e_x, cls]);
    Ok(mlp_on_tape(tape, &vars.signal, &params.signal, input))
}

/// Residual heads on [f, xi], plus the opacity head that reads `f` alone.
pub fn heads_on_tape(
    tape: &mut Tape,
    vars: &MappingVars,
    params: &MappingParams,
    config: &MappingConfig,
    f: Var,
    xi: Var,
) -> Result<HeadVars, MappingError> {
    check_len("geometric feature", config.hidden, f.len())?;
    check_len("signal representation", config.signal_dim, xi.len())?;
    let joint = tape.concat(&[f, xi]);
    let d_rotation = mlp_on_tape(tape, &vars.rotation_head, &params.rotation_head, joint);
    let d_scaling = mlp_on_tape(tape, &vars.scaling_head, &params.scaling_head, joint);
    let d_signal = mlp_on_tape(tape, &vars.signal_head, &params.signal_head, joint);
    let d_attn = tape.linear(vars.attn_head.0, vars.attn_head.1, f, 1, params.attn_head.in_dim);
    Ok(HeadVars { d_rotation, d_scaling, d_signal, d_attn })
}

/// Plain attenuation evaluation: (delta, f).
pub fn attenuation_forward(
    params: &MappingParams,
    config: &MappingConfig,
    e_tx: &[f64],
    e_x: &[f64],
    cls: &[f64],
) -> Result<(f64, Vec<f64>), MappingError> {
    let mut tape = Tape::new();
    let vars = MappingVars::leaves(&mut tape, params);
    let etx = tape.leaf(e_tx.to_vec());
    let ex = tape.leaf(e_x.to_vec());
    let c = tape.leaf(cls.to_vec());
    let (delta, f) = attenuation_on_tape(&mut tape, &vars, params, config, etx, ex, c)?;
    Ok((tape.value(delta)[0], tape.value(f).to_vec()))
}

/// Plain signal evaluation.
pub fn signal_forward(
    params: &MappingParams,
    config: &MappingConfig,
    f: &[f64],
    e_tx: &[f64],
    e_x: &[f64],
    cls: &[f64],
) -> Result<Vec<f64>, MappingError> {
    let mut tape = Tape::new();
    let vars = MappingVars::leaves(&mut tape, params);
    let fv = tape.leaf(f.to_vec());
    let etx = tape.leaf(e_tx.to_vec());
    let ex = tape.leaf(e_x.to_vec());
    let c = tape.leaf(cls.to_vec());
    let xi = signal_on_tape(&mut tape, &vars, params, config, fv, etx, ex, c)?;
    Ok(tape.value(xi).to_vec())
}

/// Plain residual heads over a batch of per-primitive features.
pub fn heads_forward(
    params: &MappingParams,
    config: &MappingConfig,
    features: &[(Vec<f64>, Vec<f64>)],
) -> Result<ResidualUpdate, MappingError> {
    let mut update = ResidualUpdate::zeros(features.len());
    let mut tape = Tape::new();
    let vars = MappingVars::leaves(&mut tape, params);
    for (i, (f, xi)) in features.iter().enumerate() {
        let fv = tape.leaf(f.clone());
        let xv = tape.leaf(xi.clone());
        let heads = heads_on_tape(&mut tape, &vars, params, config, fv, xv)?;
        update.d_rotation[i].copy_from_slice(tape.value(heads.d_rotation));
        update.d_scaling[i].copy_from_slice(tape.value(heads.d_scaling));
        update.d_signal[i].copy_from_slice(tape.value(heads.d_signal));
        update.d_attn[i] = tape.value(heads.d_attn)[0];
    }
    Ok(update)
}

/// Full plain pipeline over a scene's conditioning features: per-primitive
/// attenuation, signal representation, and residual corrections.
pub fn fields_forward(
    params: &MappingParams,
    config: &MappingConfig,
    e_tx: &[f64],
    e_x: &[Vec<f64>],
    cls: &[f64],
) -> Result<FieldOutputs, MappingError> {
    let mut tape = Tape::new();
    let vars = MappingVars::leaves(&mut tape, params);
    let etx = tape.leaf(e_tx.to_vec());
    let c = tape.leaf(cls.to_vec());
    let mut delta = Vec::with_capacity(e_x.len());
    let mut xi = Vec::with_capacity(e_x.len());
    let mut residuals = ResidualUpdate::zeros(e_x.len());
    for (i, embedding) in e_x.iter().enumerate() {
        let ex = tape.leaf(embedding.clone());
        let (d, f) = attenuation_on_tape(&mut tape, &vars, params, config, etx, ex, c)?;
        let x = signal_on_tape(&mut tape, &vars, params, config, f, etx, ex, c)?;
        let heads = heads_on_tape(&mut tape, &vars, params, config, f, x)?;
        delta.push(tape.value(d)[0]);
        xi.push(tape.value(x).to_vec());
        residuals.d_rotation[i].copy_from_slice(tape.value(heads.d_rotation));
        residuals.d_scaling[i].copy_from_slice(tape.value(heads.d_scaling));
        residuals.d_signal[i].copy_from_slice(tape.value(heads.d_signal));
        residuals.d_attn[i] = tape.value(heads.d_attn)[0];
    }
    Ok(FieldOutputs { delta, xi, residuals })
}

/// Reverse-mode gradients of a recorded scalar loss with respect to every
/// mapping parameter, in [`MappingVars::leaf_list`] order.
pub fn gradients(
    tape: &Tape,
    loss: Var,
    vars: &MappingVars,
) -> Result<Vec<Vec<f64>>, MappingError> {
    let grads = tape.backward(loss)?;
    Ok(vars.leaf_list().into_iter().map(|v| grads.get(v)).collect())
}
