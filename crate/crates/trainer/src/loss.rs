//! The map-matching training loss.
//!
//! Each measurement contributes a weighted mix of mean absolute error and
//! structural dissimilarity between the predicted and measured maps; an L2
//! penalty on the opacity residuals regularizes the whole batch. With a
//! perfect prediction and zero opacity residuals every term vanishes
//! identically, so the loss is exactly zero — a property the tests pin.

use crate::ssim::{gaussian_window, ssim_on_tape, SsimConfig};
use crate::TrainerError;
use autodiff::{Tape, Var};
use std::sync::Arc;

/// Loss weights and SSIM window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    /// Weight on the MAE term; 1 - beta lands on the SSIM term.
    pub beta: f64,
    /// L2 weight on the opacity residuals.
    pub attn_reg: f64,
    pub ssim: SsimConfig,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 0.8, attn_reg: 1e-4, ssim: SsimConfig::default() }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(TrainerError::InvalidConfig("beta must lie in [0, 1]"));
        }
        if !(self.attn_reg >= 0.0 && self.attn_reg.is_finite()) {
            return Err(TrainerError::InvalidConfig("attn_reg must be non-negative"));
        }
        self.ssim.validate()
    }
}

/// Data range of a batch of ground-truth maps: max - min, guarded to 1
/// when the batch is constant so the SSIM stabilizers stay positive.
pub fn dynamic_range<T: AsRef<[f64]>>(gts: &[T]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for gt in gts {
        for &v in gt.as_ref() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let range = hi - lo;
    if range > 0.0 && range.is_finite() {
        range
    } else {
        1.0
    }
}

/// Records the batch loss on the tape. `dynamic_range` is the shared SSIM
/// data range for the batch (see [`dynamic_range`]).
pub fn loss_on_tape(
    tape: &mut Tape,
    preds: &[Var],
    gts: &[Var],
    d_attn: Var,
    height: usize,
    width: usize,
    dynamic_range: f64,
    config: &LossConfig,
) -> Result<Var, TrainerError> {
    config.validate()?;
    if preds.is_empty() {
        return Err(TrainerError::EmptyBatch);
    }
    if preds.len() != gts.len() {
        return Err(TrainerError::SizeMismatch {
            what: "ground-truth maps",
            expected: preds.len(),
            got: gts.len(),
        });
    }
    for grid in preds.iter().chain(gts) {
        if grid.len() != height * width {
            return Err(TrainerError::SizeMismatch {
                what: "map pixels",
                expected: height * width,
                got: grid.len(),
            });
        }
    }
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(TrainerError::InvalidConfig("dynamic range must be positive and finite"));
    }

    let kernel = Arc::new(gaussian_window(config.ssim.window, config.ssim.sigma));
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let mut terms = Vec::with_capacity(preds.len());
    for (&pred, &gt) in preds.iter().zip(gts) {
        let diff = tape.sub(pred, gt);
        let absdiff = tape.abs(diff);
        let mae = tape.mean(absdiff);
        let similarity = ssim_on_tape(tape, pred, gt, height, width, c1, c2, &kernel);
        let neg_sim = tape.neg(similarity);
        let dissim = tape.add_const(neg_sim, 1.0);
        let mae_term = tape.scale(mae, config.beta);
        let ssim_term = tape.scale(dissim, 1.0 - config.beta);
        terms.push(tape.add(mae_term, ssim_term));
    }
    let stacked = tape.concat(&terms);
    let total = tape.sum(stacked);
    let data = tape.scale(total, 1.0 / preds.len() as f64);
    let attn_sq = tape.mul(d_attn, d_attn);
    let attn_sum = tape.sum(attn_sq);
    let reg = tape.scale(attn_sum, config.attn_reg);
    Ok(tape.add(data, reg))
}

/// Plain batch loss; the data range comes from the ground-truth maps.
pub fn loss(
    preds: &[Vec<f64>],
    gts: &[Vec<f64>],
    d_attn: &[f64],
    height: usize,
    width: usize,
    config: &LossConfig,
) -> Result<f64, TrainerError> {
    let range = dynamic_range(gts);
    let mut tape = Tape::new();
    let pred_vars: Vec<Var> = preds.iter().map(|p| tape.leaf(p.clone())).collect();
    let gt_vars: Vec<Var> = gts.iter().map(|g| tape.leaf(g.clone())).collect();
    let attn = tape.leaf(d_attn.to_vec());
    let out = loss_on_tape(&mut tape, &pred_vars, &gt_vars, attn, height, width, range, config)?;
    Ok(tape.value(out)[0])
}
