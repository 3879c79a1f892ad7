//! Differentiable QT-SNN used for training, and its exact forward in eval mode.
//!
//! Membranes live in units of one membrane step. Per layer and timestep:
//!
//! ```text
//! X = sum_j c_ij o_j          c_ij: weight code, quantized (train/eval) or clipped-linear (relaxed)
//! H = s X + m_prev / 2        s = 2^k; train/eval floor both terms
//! o = fire(H; theta_f)        discrete in train/eval, clipped-linear in relaxed
//! m = (1 - |o|) clamp(H, ±n_u)
//! ```
//!
//! The readout is the per-class sum of output spikes; the loss is softmax
//! cross-entropy on those sums.

use serde::{Deserialize, Serialize};

use super::{ste_quantize, surrogate_window};
use crate::error::{Error, Result};
use crate::quant::{levels_per_sign, quantize_index, K_MAX, K_MIN};
use crate::topology::{check_chain, LayerShape};

/// Lower bound enforced on `theta_f` after every update.
pub const THETA_F_MIN: f64 = 0.5;
/// Lower bound enforced on `alpha_w` after every update.
pub const ALPHA_W_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Same forward as `Eval`; surrogate and straight-through backward
    /// (the floors pass gradients unchanged).
    Train,
    /// Discrete forward with floor-halving; matches the integer engine.
    Eval,
    /// Every discrete op replaced by its clipped-linear relaxation.
    Relaxed,
}

/// Trainable parameters of one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLayer {
    pub shape: LayerShape,
    /// Latent full-precision weights, row-major `fan_out x fan_in`.
    pub w_latent: Vec<f64>,
    /// Weight clipping threshold.
    pub alpha_w: f64,
    /// Firing threshold in membrane steps (`v_th / alpha_1`).
    pub theta_f: f64,
    /// `log2` of the weight-step / membrane-step ratio; rounded in the forward pass.
    pub k_latent: f64,
}

impl TrainLayer {
    pub fn k_int(&self) -> i32 {
        self.k_latent.round().clamp(K_MIN as f64, K_MAX as f64) as i32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtSnnModel {
    pub layers: Vec<TrainLayer>,
    pub timesteps: usize,
    pub bits_w: u32,
    pub bits_u: u32,
}

impl QtSnnModel {
    pub fn validate(&self) -> Result<()> {
        let shapes: Vec<LayerShape> = self.layers.iter().map(|l| l.shape).collect();
        check_chain(&shapes)?;
        levels_per_sign(self.bits_w)?;
        levels_per_sign(self.bits_u)?;
        if self.timesteps == 0 {
            return Err(Error::config("timesteps must be at least 1"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !matches!(l.shape, LayerShape::Dense { .. }) {
                return Err(Error::Unsupported(format!(
                    "layer {i}: training supports dense layers only"
                )));
            }
            if l.w_latent.len() != l.shape.weight_count() {
                return Err(Error::dim(format!("layer {i}: weight count mismatch")));
            }
            if !(l.alpha_w > 0.0 && l.theta_f > 0.0) {
                return Err(Error::domain(format!(
                    "layer {i}: alpha_w and theta_f must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].shape.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].shape.output_size()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w_latent.len() + 3).sum()
    }

    /// Parameters flattened as `[w..., alpha_w, theta_f, k_latent]` per layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w_latent);
            out.extend([l.alpha_w, l.theta_f, l.k_latent]);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for w in &mut l.w_latent {
                *w = it.next().expect("parameter vector too short");
            }
            l.alpha_w = it.next().expect("parameter vector too short");
            l.theta_f = it.next().expect("parameter vector too short");
            l.k_latent = it.next().expect("parameter vector too short");
        }
    }

    /// Keeps `theta_f` and `alpha_w` positive and `k_latent` within range.
    pub fn project(&mut self) {
        for l in &mut self.layers {
            l.theta_f = l.theta_f.max(THETA_F_MIN);
            l.alpha_w = l.alpha_w.max(ALPHA_W_MIN);
            l.k_latent = l.k_latent.clamp(K_MIN as f64, K_MAX as f64);
        }
    }
}

/// Effective weights of a layer for one forward pass, with their derivatives.
#[derive(Debug, Clone)]
struct Codes {
    code: Vec<f64>,
    dcode_dw: Vec<f64>,
    dcode_dalpha: Vec<f64>,
    scale: f64,
    dscale_dk: f64,
}

fn layer_codes(layer: &TrainLayer, bits_w: u32, mode: Mode) -> Codes {
    let n = levels_per_sign(bits_w).expect("validated") as f64;
    let alpha = layer.alpha_w;
    let len = layer.w_latent.len();
    let mut code = Vec::with_capacity(len);
    let mut dcode_dw = Vec::with_capacity(len);
    let mut dcode_dalpha = Vec::with_capacity(len);
    for &w in &layer.w_latent {
        match mode {
            Mode::Train | Mode::Eval => {
                let (level, dx, da) = ste_quantize(w, alpha, bits_w).expect("validated");
                code.push(quantize_index(w, alpha, bits_w).expect("validated") as f64);
                dcode_dw.push(n / alpha * dx);
                dcode_dalpha.push(n * (da * alpha - level) / (alpha * alpha));
            }
            Mode::Relaxed => {
                let inside = w.abs() <= alpha;
                let clipped = w.clamp(-alpha, alpha);
                code.push(n * clipped / alpha);
                dcode_dw.push(if inside { n / alpha } else { 0.0 });
                dcode_dalpha.push(if inside { -n * w / (alpha * alpha) } else { 0.0 });
            }
        }
    }
    let ln2 = std::f64::consts::LN_2;
    let (scale, dscale_dk) = match mode {
        Mode::Train | Mode::Eval => {
            let s = 2f64.powi(layer.k_int());
            let live = (K_MIN as f64 - 0.5..=K_MAX as f64 + 0.5).contains(&layer.k_latent);
            (s, if live { ln2 * s } else { 0.0 })
        }
        Mode::Relaxed => {
            let k = layer.k_latent.clamp(K_MIN as f64, K_MAX as f64);
            let s = k.exp2();
            let live = (K_MIN as f64..=K_MAX as f64).contains(&layer.k_latent);
            (s, if live { ln2 * s } else { 0.0 })
        }
    };
    Codes {
        code,
        dcode_dw,
        dcode_dalpha,
        scale,
        dscale_dk,
    }
}

/// Per-layer activations recorded during a forward pass, indexed `[t][neuron]`.
#[derive(Debug, Clone, Default)]
struct Tape {
    input: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    o: Vec<Vec<f64>>,
    abs_o: Vec<Vec<f64>>,
    clamped: Vec<Vec<f64>>,
}

/// Output of [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub scores: Vec<f64>,
    /// `spikes[t][l]` (discrete modes only; relaxed values are rounded to the nearest spike).
    pub spikes: Vec<Vec<Vec<i8>>>,
    tapes: Vec<Tape>,
    codes: Vec<Codes>,
}

impl ForwardPass {
    pub fn loss(&self, label: usize) -> f64 {
        cross_entropy(&self.scores, label).0
    }

    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

fn relaxed_fire(h: f64, theta: f64, gamma: f64) -> (f64, f64) {
    let up = ((h - theta + gamma) / (2.0 * gamma)).clamp(0.0, 1.0);
    let down = ((-h - theta + gamma) / (2.0 * gamma)).clamp(0.0, 1.0);
    (up - down, up + down)
}

/// Runs the model on one `T x fan_in` input.
pub fn forward(model: &QtSnnModel, inputs: &[Vec<i8>], gamma: f64, mode: Mode) -> ForwardPass {
    let n_u = levels_per_sign(model.bits_u).expect("validated") as f64;
    let codes: Vec<Codes> = model
        .layers
        .iter()
        .map(|l| layer_codes(l, model.bits_w, mode))
        .collect();
    let mut tapes: Vec<Tape> = vec![Tape::default(); model.layers.len()];
    let mut carried: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; l.shape.output_size()])
        .collect();
    let mut scores = vec![0.0; model.output_size()];
    let mut spikes = Vec::with_capacity(inputs.len());

    for row in inputs {
        let mut act: Vec<f64> = row.iter().map(|&s| f64::from(s)).collect();
        let mut t_spikes = Vec::with_capacity(model.layers.len());
        for (l, layer) in model.layers.iter().enumerate() {
            let cd = &codes[l];
            let n_out = layer.shape.output_size();
            let mut x = vec![0.0; n_out];
            let mut h = vec![0.0; n_out];
            let mut o = vec![0.0; n_out];
            let mut abs_o = vec![0.0; n_out];
            let mut clamped = vec![0.0; n_out];
            for i in 0..n_out {
                let mut xi = 0.0;
                layer.shape.for_each_synapse(i, |j, wi| xi += cd.code[wi] * act[j]);
                let hi = match mode {
                    Mode::Eval | Mode::Train => (cd.scale * xi).floor() + (carried[l][i] / 2.0).floor(),
                    _ => cd.scale * xi + 0.5 * carried[l][i],
                };
                let (oi, ai) = match mode {
                    Mode::Relaxed => relaxed_fire(hi, layer.theta_f, gamma),
                    _ => {
                        let s = if hi >= layer.theta_f {
                            1.0
                        } else if hi <= -layer.theta_f {
                            -1.0
                        } else {
                            0.0
                        };
                        (s, f64::abs(s))
                    }
                };
                let ci = hi.clamp(-n_u, n_u);
                carried[l][i] = (1.0 - ai) * ci;
                x[i] = xi;
                h[i] = hi;
                o[i] = oi;
                abs_o[i] = ai;
                clamped[i] = ci;
            }
            let tape = &mut tapes[l];
            tape.input.push(act);
            tape.x.push(x);
            tape.h.push(h);
            tape.abs_o.push(abs_o);
            tape.clamped.push(clamped);
            t_spikes.push(o.iter().map(|&v| v.round() as i8).collect());
            tape.o.push(o.clone());
            act = o;
        }
        for (s, v) in scores.iter_mut().zip(&act) {
            *s += v;
        }
        spikes.push(t_spikes);
    }
    ForwardPass {
        scores,
        spikes,
        tapes,
        codes,
    }
}

/// Softmax cross-entropy and its gradient with respect to the scores.
pub fn cross_entropy(scores: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + max - scores[label];
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / z - if i == label { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Loss and gradient (in [`QtSnnModel::params`] order) for one sample.
pub fn loss_and_grad(
    model: &QtSnnModel,
    inputs: &[Vec<i8>],
    label: usize,
    gamma: f64,
    mode: Mode,
) -> (f64, Vec<f64>) {
    assert!(mode != Mode::Eval, "eval mode has no backward pass");
    let pass = forward(model, inputs, gamma, mode);
    let (loss, dscores) = cross_entropy(&pass.scores, label);
    let n_u = levels_per_sign(model.bits_u).expect("validated") as f64;
    let n_layers = model.layers.len();
    let steps = inputs.len();

    // dL/do per layer and timestep
    let mut grad_o: Vec<Vec<Vec<f64>>> = model
        .layers
        .iter()
        .map(|l| vec![vec![0.0; l.shape.output_size()]; steps])
        .collect();
    for row in &mut grad_o[n_layers - 1] {
        row.copy_from_slice(&dscores);
    }
    // dL/dm carried into the next timestep
    let mut grad_m: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; l.shape.output_size()])
        .collect();
    let mut dcode: Vec<Vec<f64>> = model.layers.iter().map(|l| vec![0.0; l.w_latent.len()]).collect();
    let mut dtheta = vec![0.0; n_layers];
    let mut dscale = vec![0.0; n_layers];

    for t in (0..steps).rev() {
        for l in (0..n_layers).rev() {
            let layer = &model.layers[l];
            let tape = &pass.tapes[l];
            let cd = &pass.codes[l];
            let n_out = layer.shape.output_size();
            let mut grad_in = vec![0.0; layer.shape.input_size()];
            for i in 0..n_out {
                let h = tape.h[t][i];
                let gm = grad_m[l][i];
                let go = grad_o[l][t][i];
                let d_keep = gm * tape.clamped[t][i];
                let d_clamped = gm * (1.0 - tape.abs_o[t][i]);
                let fg = surrogate_window(h, layer.theta_f, gamma);
                let sat = if h.abs() <= n_u { 1.0 } else { 0.0 };
                let dh = go * fg.do_dh - d_keep * fg.dabs_dh + d_clamped * sat;
                dtheta[l] += go * fg.do_dtheta - d_keep * fg.dabs_dtheta;
                grad_m[l][i] = 0.5 * dh;
                dscale[l] += dh * tape.x[t][i];
                let dx = dh * cd.scale;
                if dx != 0.0 {
                    let input = &tape.input[t];
                    layer.shape.for_each_synapse(i, |j, wi| {
                        dcode[l][wi] += dx * input[j];
                        grad_in[j] += dx * cd.code[wi];
                    });
                }
            }
            if l > 0 {
                for (g, d) in grad_o[l - 1][t].iter_mut().zip(grad_in) {
                    *g += d;
                }
            }
        }
    }

    let mut grad = Vec::with_capacity(model.param_count());
    for l in 0..n_layers {
        let cd = &pass.codes[l];
        grad.extend(dcode[l].iter().zip(&cd.dcode_dw).map(|(d, dw)| d * dw));
        let dalpha: f64 = dcode[l].iter().zip(&cd.dcode_dalpha).map(|(d, da)| d * da).sum();
        grad.push(dalpha);
        grad.push(dtheta[l]);
        grad.push(dscale[l] * cd.dscale_dk);
    }
    (loss, grad)
}
