//! Finite-difference check of the analytic gradients.
//!
//! Runs in relaxed mode, where the forward is piecewise smooth, and skips
//! parameters whose central difference straddles a kink.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{forward, loss_and_grad, Mode, QtSnnModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub params: usize,
    pub seed: u64,
    pub gamma: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            params: 20,
            seed: 0,
            gamma: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_error: f64,
}

/// `|a - f| / max(|a|, |f|)`, zero when both are negligible.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Compares analytic and central-difference gradients on `params` randomly
/// chosen parameters.
pub fn grad_check(
    model: &QtSnnModel,
    inputs: &[Vec<i8>],
    label: usize,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    model.validate()?;
    if !(opts.step > 0.0) {
        return Err(Error::config("finite-difference step must be positive"));
    }
    let (_, grad) = loss_and_grad(model, inputs, label, opts.gamma, Mode::Relaxed);
    let base = model.params();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let chosen = sample(&mut rng, base.len(), opts.params.min(base.len()));
    let loss_at = |params: &[f64]| {
        let mut m = model.clone();
        m.set_params(params);
        forward(&m, inputs, opts.gamma, Mode::Relaxed).loss(label)
    };
    let mut entries = Vec::with_capacity(chosen.len());
    for index in chosen.iter() {
        let mut plus = base.clone();
        plus[index] += opts.step;
        let mut minus = base.clone();
        minus[index] -= opts.step;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * opts.step);
        entries.push(GradCheckEntry {
            index,
            analytic: grad[index],
            numeric,
            rel_error: relative_error(grad[index], numeric),
        });
    }
    let max_rel_error = entries.iter().fold(0.0f64, |m, e| m.max(e.rel_error));
    Ok(GradCheckReport {
        entries,
        max_rel_error,
    })
}
