//! Threshold-based signal-to-spike encoders and their reconstructors.
//!
//! Every encoder starts its baseline at the first sample and emits 0 there.
//! SF and TBR keep their baseline as `init + k * threshold0` with an integer
//! step counter, and TAE keeps its threshold as `threshold0 * a^m` with an
//! integer exponent, so the decoders can replay the exact same arithmetic.

mod compare;

pub use compare::{compare_encoders, encode_with, ComparisonReport, ComparisonRow};

use crate::error::{Error, Result};
use crate::signal::{AnalogSignal, EncoderMeta, Method, TernarySpikeTrain};

/// Default adaptation factor for TAE.
pub const DEFAULT_TAE_A: f64 = 1.1;

/// TAE thresholds stay within `threshold0 * [1e-6, 1e6]`.
pub const TAE_CLAMP_RATIO: f64 = 1e6;

/// Internal state of an encoder after each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrace {
    /// Running baseline after each step; `base_trace[0]` is the first sample.
    pub base_trace: Vec<f64>,
    /// TAE only: threshold after each step's update (`threshold0` at index 0).
    pub threshold_trace: Vec<f64>,
    /// TAE only: exponent `m` with `threshold_trace[i] == threshold0 * a^m`.
    pub threshold_exponents: Vec<i32>,
}

fn check_input(signal: &AnalogSignal) -> Result<()> {
    if signal.is_empty() {
        return Err(Error::domain("cannot encode an empty signal"));
    }
    Ok(())
}

/// Step-forward encoding: fixed threshold, strict comparisons.
pub fn encode_sf(signal: &AnalogSignal, threshold0: f64) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    let meta = EncoderMeta::sf(threshold0, signal.sample_rate());
    meta.validate()?;
    check_input(signal)?;
    let x = signal.samples();
    let init = x[0];
    let mut steps: i64 = 0;
    let mut spikes = vec![0i8; x.len()];
    let mut base_trace = Vec::with_capacity(x.len());
    base_trace.push(init);
    for i in 1..x.len() {
        let base = lattice(init, steps, threshold0);
        if x[i] > base + threshold0 {
            spikes[i] = 1;
            steps += 1;
        } else if x[i] < base - threshold0 {
            spikes[i] = -1;
            steps -= 1;
        }
        base_trace.push(lattice(init, steps, threshold0));
    }
    finish(spikes, init, meta, base_trace)
}

/// Threshold-adaptive encoding: the threshold grows by `a` after every spike and
/// shrinks by `a` after every silent step. Comparisons are non-strict.
pub fn encode_tae(
    signal: &AnalogSignal,
    threshold0: f64,
    a: f64,
) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    let meta = EncoderMeta::tae(threshold0, a, signal.sample_rate());
    meta.validate()?;
    check_input(signal)?;
    let x = signal.samples();
    let init = x[0];
    let mut adapt = TaeThreshold::new(threshold0, a);
    let mut base = init;
    let mut spikes = vec![0i8; x.len()];
    let mut base_trace = Vec::with_capacity(x.len());
    let mut threshold_trace = Vec::with_capacity(x.len());
    let mut threshold_exponents = Vec::with_capacity(x.len());
    base_trace.push(base);
    threshold_trace.push(adapt.value());
    threshold_exponents.push(adapt.exponent());
    for i in 1..x.len() {
        let th = adapt.value();
        let s = if x[i] >= base + th {
            1
        } else if x[i] <= base - th {
            -1
        } else {
            0
        };
        spikes[i] = s;
        base = tae_update(&mut adapt, base, s);
        base_trace.push(base);
        threshold_trace.push(adapt.value());
        threshold_exponents.push(adapt.exponent());
    }
    let train = TernarySpikeTrain::new(spikes, init, meta)?;
    Ok((
        train,
        EncoderTrace {
            base_trace,
            threshold_trace,
            threshold_exponents,
        },
    ))
}

/// First-difference thresholding: emits `sign(d)` whenever `|d| >= threshold0`.
pub fn encode_tbr(signal: &AnalogSignal, threshold0: f64) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    let meta = EncoderMeta::tbr(threshold0, signal.sample_rate());
    meta.validate()?;
    check_input(signal)?;
    let x = signal.samples();
    let init = x[0];
    let mut steps: i64 = 0;
    let mut spikes = vec![0i8; x.len()];
    let mut base_trace = Vec::with_capacity(x.len());
    base_trace.push(init);
    for i in 1..x.len() {
        let d = x[i] - x[i - 1];
        if d.abs() >= threshold0 {
            let s = if d > 0.0 { 1 } else { -1 };
            spikes[i] = s;
            steps += i64::from(s);
        }
        base_trace.push(lattice(init, steps, threshold0));
    }
    finish(spikes, init, meta, base_trace)
}

/// Moving-window encoding: compares each sample against the mean of the
/// preceding `window` samples (fewer near the start).
pub fn encode_mw(
    signal: &AnalogSignal,
    threshold0: f64,
    window: usize,
) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    let meta = EncoderMeta::mw(threshold0, window, signal.sample_rate());
    meta.validate()?;
    check_input(signal)?;
    let x = signal.samples();
    let init = x[0];
    let mut spikes = vec![0i8; x.len()];
    let mut base_trace = Vec::with_capacity(x.len());
    base_trace.push(init);
    for i in 1..x.len() {
        let w = window.min(i);
        let base = x[i - w..i].iter().sum::<f64>() / w as f64;
        if x[i] > base + threshold0 {
            spikes[i] = 1;
        } else if x[i] < base - threshold0 {
            spikes[i] = -1;
        }
        base_trace.push(base);
    }
    finish(spikes, init, meta, base_trace)
}

/// Replays the encoder's baseline from the spikes and metadata alone.
///
/// The output equals the encoder's `base_trace` element for element. MW cannot
/// be inverted (its baseline depends on the raw samples) and is rejected.
pub fn decode(train: &TernarySpikeTrain) -> Result<AnalogSignal> {
    let meta = train.meta();
    let init = train.init();
    let th = meta.threshold0;
    let values = train.values();
    let mut out = Vec::with_capacity(values.len());
    match meta.method {
        Method::Sf | Method::Tbr => {
            let mut steps: i64 = 0;
            for (i, &s) in values.iter().enumerate() {
                if i > 0 {
                    steps += i64::from(s);
                }
                out.push(lattice(init, steps, th));
            }
        }
        Method::Tae => {
            let a = meta
                .a
                .ok_or_else(|| Error::config("TAE metadata is missing the adaptation factor"))?;
            let mut adapt = TaeThreshold::new(th, a);
            let mut base = init;
            for (i, &s) in values.iter().enumerate() {
                if i > 0 {
                    base = tae_update(&mut adapt, base, s);
                }
                out.push(base);
            }
        }
        Method::Mw => {
            return Err(Error::Unsupported(
                "MW spikes cannot be decoded: the moving-mean baseline depends on the raw samples"
                    .into(),
            ))
        }
    }
    AnalogSignal::new(out, meta.sample_rate)
}

/// Encodes with the default TAE factor.
pub fn encode_tae_default(signal: &AnalogSignal, threshold0: f64) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    encode_tae(signal, threshold0, DEFAULT_TAE_A)
}

#[inline]
fn lattice(init: f64, steps: i64, threshold0: f64) -> f64 {
    init + steps as f64 * threshold0
}

fn finish(
    spikes: Vec<i8>,
    init: f64,
    meta: EncoderMeta,
    base_trace: Vec<f64>,
) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    let train = TernarySpikeTrain::new(spikes, init, meta)?;
    Ok((
        train,
        EncoderTrace {
            base_trace,
            threshold_trace: Vec::new(),
            threshold_exponents: Vec::new(),
        },
    ))
}

/// Shared by encoder and decoder so both move the baseline identically.
fn tae_update(adapt: &mut TaeThreshold, base: f64, spike: i8) -> f64 {
    let th = adapt.value();
    match spike {
        1 => {
            adapt.grow();
            base + th
        }
        -1 => {
            adapt.grow();
            base - th
        }
        _ => {
            adapt.shrink();
            base
        }
    }
}

/// TAE threshold held as `threshold0 * a^m` with a clamped integer exponent.
#[derive(Debug, Clone, Copy)]
struct TaeThreshold {
    threshold0: f64,
    a: f64,
    m: i32,
    m_min: i32,
    m_max: i32,
}

impl TaeThreshold {
    fn new(threshold0: f64, a: f64) -> Self {
        let span = TAE_CLAMP_RATIO.ln() / a.ln();
        // an exponent bound beyond i32 is effectively unbounded
        let bound = span.floor().min(i32::MAX as f64) as i32;
        Self {
            threshold0,
            a,
            m: 0,
            m_min: -bound,
            m_max: bound,
        }
    }

    fn value(&self) -> f64 {
        self.threshold0 * self.a.powi(self.m)
    }

    fn exponent(&self) -> i32 {
        self.m
    }

    fn grow(&mut self) {
        self.m = (self.m + 1).min(self.m_max);
    }

    fn shrink(&mut self) {
        self.m = (self.m - 1).max(self.m_min);
    }
}
