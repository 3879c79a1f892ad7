//! Desk-scale surrogate-gradient training of quantized ternary SNNs.
//!
//! The task: classify square, sawtooth and sine waves from their TAE spike
//! trains. Inputs are the spike train cut into `T` consecutive chunks of
//! `fan_in` spikes. Training is SGD with momentum on softmax cross-entropy,
//! with a norm-clipped batch gradient and a cosine-decayed learning rate.
//! Gradients flow back through time via a rectangular surrogate for the firing
//! function and straight-through estimators for weight quantization, the
//! power-of-two scale exponent and the integer floors.

mod gradcheck;
mod model;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gradcheck::{grad_check, relative_error, GradCheckEntry, GradCheckOptions, GradCheckReport};
pub use model::{cross_entropy, forward, loss_and_grad, ForwardPass, Mode, QtSnnModel, TrainLayer, THETA_F_MIN};

use crate::corpus::{gen_labeled, CorpusKind, WAVEFORM_CLASSES};
use crate::encoders::{encode_tae, DEFAULT_TAE_A};
use crate::error::{Error, Result};
use crate::qtsnn::QtLayer;
use crate::quant::{levels_per_sign, quantize, quantize_index};
use crate::signal::{AnalogSignal, TernarySpikeTrain};
use crate::topology::LayerShape;

/// Rectangular surrogate of the ternary firing function.
///
/// Forward fires +1 at `u >= v_th`, -1 at `u <= -v_th`. The derivative is
/// `1 / (2 gamma)` within `gamma` of either threshold and 0 elsewhere.
pub fn surrogate_fire(u: f64, v_th: f64, gamma: f64) -> (i8, f64) {
    let spike = crate::tlif::fire(u, v_th);
    let inside = (u - v_th).abs() <= gamma || (u + v_th).abs() <= gamma;
    (spike, if inside { 1.0 / (2.0 * gamma) } else { 0.0 })
}

/// Surrogate derivatives of the spike `o` and of `|o|` with respect to the
/// membrane and the threshold, one window per threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FireGrad {
    pub do_dh: f64,
    pub dabs_dh: f64,
    pub do_dtheta: f64,
    pub dabs_dtheta: f64,
}

pub(crate) fn surrogate_window(h: f64, theta: f64, gamma: f64) -> FireGrad {
    let g = 1.0 / (2.0 * gamma);
    let up = if (h - theta).abs() <= gamma { g } else { 0.0 };
    let down = if (h + theta).abs() <= gamma { g } else { 0.0 };
    FireGrad {
        do_dh: up + down,
        dabs_dh: up - down,
        do_dtheta: down - up,
        dabs_dtheta: -up - down,
    }
}

/// Quantizes with straight-through gradients: `d level / dx` is 1 inside the
/// clip range, `d level / d alpha` is `sign(x)` outside it.
pub fn ste_quantize(x: f64, alpha: f64, bits: u32) -> Result<(f64, f64, f64)> {
    let level = quantize(x, alpha, bits)?;
    if x.abs() <= alpha {
        Ok((level, 1.0, 0.0))
    } else {
        Ok((level, 0.0, x.signum()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Surrogate window half-width.
    pub gamma: f64,
    pub seed: u64,
    pub bits_w: u32,
    pub bits_u: u32,
    #[serde(alias = "T")]
    pub timesteps: usize,
    /// Spikes per timestep (input layer width).
    pub fan_in: usize,
    pub hidden: usize,
    pub samples_per_class: usize,
    /// TAE adaptation factor used to encode the corpus.
    pub tae_a: f64,
    /// Global-norm bound on each batch gradient; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            gamma: 0.5,
            seed: 1,
            bits_w: 4,
            bits_u: 4,
            timesteps: 16,
            fan_in: 16,
            hidden: 64,
            samples_per_class: 300,
            tae_a: DEFAULT_TAE_A,
            grad_clip: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 || self.timesteps == 0 || self.fan_in == 0 || self.hidden == 0 {
            return Err(Error::config(
                "batch_size, timesteps, fan_in and hidden must be positive",
            ));
        }
        if self.samples_per_class < 5 {
            return Err(Error::config("need at least 5 samples per class for an 80/20 split"));
        }
        if !(self.tae_a > 1.0) {
            return Err(Error::config(format!("tae_a must exceed 1, got {}", self.tae_a)));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::config(format!("grad_clip must be non-negative, got {}", self.grad_clip)));
        }
        levels_per_sign(self.bits_w)?;
        levels_per_sign(self.bits_u)?;
        Ok(())
    }

    pub fn signal_len(&self) -> usize {
        self.timesteps * self.fan_in
    }
}

/// Cuts a spike train into `timesteps` rows of `fan_in` spikes.
pub fn reshape_spikes(values: &[i8], timesteps: usize, fan_in: usize) -> Result<Vec<Vec<i8>>> {
    if values.len() != timesteps * fan_in {
        return Err(Error::dim(format!(
            "spike train of length {} cannot be reshaped to {timesteps} x {fan_in}",
            values.len()
        )));
    }
    Ok(values.chunks(fan_in).map(<[i8]>::to_vec).collect())
}

/// TAE-encodes a signal with its default threshold and reshapes it.
pub fn encode_for_model(signal: &AnalogSignal, timesteps: usize, fan_in: usize, a: f64) -> Result<Vec<Vec<i8>>> {
    let (train, _) = encode_tae(signal, signal.default_threshold(), a)?;
    train_to_inputs(&train, timesteps, fan_in)
}

pub fn train_to_inputs(train: &TernarySpikeTrain, timesteps: usize, fan_in: usize) -> Result<Vec<Vec<i8>>> {
    reshape_spikes(train.values(), timesteps, fan_in)
}

/// An encoded, labeled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<i8>>,
    pub label: usize,
}

/// The encoded waveform task, split 80/20 per class.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn build_dataset(cfg: &TrainConfig) -> Result<Dataset> {
    let n = cfg.samples_per_class * WAVEFORM_CLASSES;
    let corpus = gen_labeled(CorpusKind::SquareSawSine, n, cfg.signal_len(), cfg.seed)?;
    let mut by_class: Vec<Vec<Sample>> = vec![Vec::new(); WAVEFORM_CLASSES];
    for (signal, label) in corpus {
        let inputs = encode_for_model(&signal, cfg.timesteps, cfg.fan_in, cfg.tae_a)?;
        by_class[label].push(Sample { inputs, label });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SPLIT_SEED_SALT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut class in by_class {
        class.shuffle(&mut rng);
        let n_test = class.len() / 5;
        test.extend(class.drain(..n_test));
        train.extend(class);
    }
    Ok(Dataset { train, test })
}

const SPLIT_SEED_SALT: u64 = 0x5eed_5711;

/// Initial weights are uniform in `±INIT_WEIGHT_FRACTION * alpha_w`.
const INIT_WEIGHT_FRACTION: f64 = 0.75;
/// Initial scale exponent: quarter-step drive keeps early membranes near threshold.
const INIT_K: f64 = -2.0;
const INIT_THETA_F: f64 = 1.5;

/// Random initial model for `cfg`: input -> hidden -> 3 classes.
pub fn init_model(cfg: &TrainConfig) -> QtSnnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shapes = [
        LayerShape::dense(cfg.fan_in, cfg.hidden),
        LayerShape::dense(cfg.hidden, WAVEFORM_CLASSES),
    ];
    let layers = shapes
        .iter()
        .map(|&shape| {
            let alpha_w = 1.0;
            let bound = INIT_WEIGHT_FRACTION * alpha_w;
            TrainLayer {
                shape,
                w_latent: (0..shape.weight_count())
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
                alpha_w,
                theta_f: INIT_THETA_F,
                k_latent: INIT_K,
            }
        })
        .collect();
    QtSnnModel {
        layers,
        timesteps: cfg.timesteps,
        bits_w: cfg.bits_w,
        bits_u: cfg.bits_u,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean train-mode loss over the training set after the epoch.
    pub train_loss: f64,
    /// Eval-mode accuracies.
    pub train_acc: f64,
    pub test_acc: f64,
}

pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
    for m in history {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            m.epoch, m.train_loss, m.train_acc, m.test_acc
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QtSnnModel,
    /// Row 0 is the untrained model; row `e` follows epoch `e`.
    pub history: Vec<EpochMetrics>,
    pub dataset: Dataset,
}

impl TrainOutcome {
    pub fn final_metrics(&self) -> EpochMetrics {
        *self.history.last().expect("history holds the initial row")
    }
}

/// Eval-mode accuracy (identical to the exported integer engine).
pub fn accuracy(model: &QtSnnModel, samples: &[Sample], gamma: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let correct = samples
        .iter()
        .filter(|s| forward(model, &s.inputs, gamma, Mode::Eval).predicted_class() == s.label)
        .count();
    correct as f64 / samples.len() as f64
}

fn mean_loss(model: &QtSnnModel, samples: &[Sample], gamma: f64) -> f64 {
    samples
        .iter()
        .map(|s| forward(model, &s.inputs, gamma, Mode::Train).loss(s.label))
        .sum::<f64>()
        / samples.len() as f64
}

/// Learning rate for 1-based `epoch`: cosine decay from `base` toward 0.
pub fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    let progress = (epoch - 1) as f64 / epochs as f64;
    0.5 * base * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Trains on the waveform task.
pub fn train_toy(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dataset = build_dataset(cfg)?;
    let mut model = init_model(cfg);
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut velocity = vec![0.0; model.param_count()];
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    let mut history = vec![EpochMetrics {
        epoch: 0,
        train_loss: mean_loss(&model, &dataset.train, cfg.gamma),
        train_acc: accuracy(&model, &dataset.train, cfg.gamma),
        test_acc: accuracy(&model, &dataset.test, cfg.gamma),
    }];

    for epoch in 1..=cfg.epochs {
        let lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; model.param_count()];
            for &idx in batch {
                let s = &dataset.train[idx];
                let (loss, g) = loss_and_grad(&model, &s.inputs, s.label, cfg.gamma, Mode::Train);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss at epoch {epoch}, sample {idx}"
                    )));
                }
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            let mut scale = 1.0 / batch.len() as f64;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() * scale;
            if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
                scale *= cfg.grad_clip / norm;
            }
            let mut params = model.params();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g * scale;
                *p -= lr * *v;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged(format!("non-finite parameter at epoch {epoch}")));
            }
            model.set_params(&params);
            model.project();
        }
        let train_loss = mean_loss(&model, &dataset.train, cfg.gamma);
        if !train_loss.is_finite() {
            return Err(Error::Diverged(format!("training loss is {train_loss} after epoch {epoch}")));
        }
        history.push(EpochMetrics {
            epoch,
            train_loss,
            train_acc: accuracy(&model, &dataset.train, cfg.gamma),
            test_acc: accuracy(&model, &dataset.test, cfg.gamma),
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        dataset,
    })
}

/// Converts a trained model to integer layers: weight codes, `ceil(theta_f)`
/// and the rounded scale exponent.
pub fn export_for_inference(model: &QtSnnModel) -> Result<Vec<QtLayer>> {
    model.validate()?;
    model
        .layers
        .iter()
        .map(|l| {
            if l.theta_f <= 0.0 {
                return Err(Error::domain("theta_f must be positive to export"));
            }
            let w_int = l
                .w_latent
                .iter()
                .map(|&w| quantize_index(w, l.alpha_w, model.bits_w).map(|c| c as i32))
                .collect::<Result<Vec<i32>>>()?;
            let theta = l.theta_f.ceil().max(1.0) as i32;
            let mut layer = QtLayer::new(l.shape, w_int, l.k_int(), theta, model.bits_w, model.bits_u)?;
            layer.theta_f = Some(l.theta_f);
            layer.alpha_w = Some(l.alpha_w);
            Ok(layer)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        assert_eq!(surrogate_fire(0.0, 1.0, 0.5), (0, 0.0));
        assert_eq!(surrogate_fire(1.2, 1.0, 0.5), (1, 1.0));
        assert_eq!(surrogate_fire(-0.9, 1.0, 0.5), (0, 1.0));
        assert_eq!(surrogate_fire(-1.3, 1.0, 0.5), (-1, 1.0));
    }

    #[test]
    fn ste_examples() {
        let (l, dx, da) = ste_quantize(0.4, 1.0, 3).unwrap();
        assert_eq!((l, dx, da), (1.0 / 3.0, 1.0, 0.0));
        assert_eq!(ste_quantize(5.0, 1.0, 3).unwrap(), (1.0, 0.0, 1.0));
        assert_eq!(ste_quantize(-5.0, 1.0, 3).unwrap(), (-1.0, 0.0, -1.0));
    }

    #[test]
    fn export_rounds_threshold_and_exponent() {
        let model = QtSnnModel {
            layers: vec![TrainLayer {
                shape: LayerShape::dense(2, 1),
                w_latent: vec![0.5, -2.0],
                alpha_w: 1.0,
                theta_f: 2.3,
                k_latent: 1.4,
            }],
            timesteps: 2,
            bits_w: 4,
            bits_u: 4,
        };
        let layers = export_for_inference(&model).unwrap();
        assert_eq!(layers[0].theta, 3);
        assert_eq!(layers[0].k, 1);
        assert_eq!(layers[0].w_int, vec![4, -7]);
    }

    #[test]
    fn reshape_requires_exact_length() {
        assert_eq!(reshape_spikes(&[0, 1, -1, 0], 2, 2).unwrap(), vec![vec![0, 1], vec![-1, 0]]);
        assert!(reshape_spikes(&[0, 1, -1], 2, 2).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { gamma: -1.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }
}
