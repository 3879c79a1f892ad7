//! Analog signals, ternary spike trains and the encoder metadata that ties them together.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSignal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AnalogSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::domain(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Largest absolute amplitude, 0 for an empty signal.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Rescales to unit peak. Returns the signal and the factor the samples were divided by
    /// (1 for an all-zero signal).
    pub fn peak_normalized(&self) -> (AnalogSignal, f64) {
        let peak = self.peak();
        if peak == 0.0 {
            return (self.clone(), 1.0);
        }
        let samples = self.samples.iter().map(|x| x / peak).collect();
        (
            AnalogSignal {
                samples,
                sample_rate: self.sample_rate,
            },
            peak,
        )
    }

    /// Standard deviation of the first differences, used as the scale-free default
    /// encoder threshold. Falls back to 1.0 when the signal has no variation.
    pub fn default_threshold(&self) -> f64 {
        if self.samples.len() < 2 {
            return 1.0;
        }
        let diffs: Vec<f64> = self.samples.windows(2).map(|w| w[1] - w[0]).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    }
}

/// The four threshold-driven encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "TBR")]
    Tbr,
    #[serde(rename = "MW")]
    Mw,
    #[serde(rename = "SF")]
    Sf,
    #[serde(rename = "TAE")]
    Tae,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tbr => "TBR",
            Method::Mw => "MW",
            Method::Sf => "SF",
            Method::Tae => "TAE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tbr" => Ok(Method::Tbr),
            "mw" => Ok(Method::Mw),
            "sf" => Ok(Method::Sf),
            "tae" => Ok(Method::Tae),
            other => Err(Error::config(format!("unknown encoder method '{other}'"))),
        }
    }
}

/// Parameters an encoder ran with; enough to replay its baseline from the spikes alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderMeta {
    pub method: Method,
    pub threshold0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    pub sample_rate: f64,
    /// Factor the source was divided by before encoding (peak normalization).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl EncoderMeta {
    pub fn sf(threshold0: f64, sample_rate: f64) -> Self {
        Self::plain(Method::Sf, threshold0, sample_rate)
    }

    pub fn tbr(threshold0: f64, sample_rate: f64) -> Self {
        Self::plain(Method::Tbr, threshold0, sample_rate)
    }

    pub fn tae(threshold0: f64, a: f64, sample_rate: f64) -> Self {
        Self {
            a: Some(a),
            ..Self::plain(Method::Tae, threshold0, sample_rate)
        }
    }

    pub fn mw(threshold0: f64, window: usize, sample_rate: f64) -> Self {
        Self {
            window: Some(window),
            ..Self::plain(Method::Mw, threshold0, sample_rate)
        }
    }

    fn plain(method: Method, threshold0: f64, sample_rate: f64) -> Self {
        Self {
            method,
            threshold0,
            a: None,
            window: None,
            sample_rate,
            scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold0 > 0.0 && self.threshold0.is_finite()) {
            return Err(Error::config(format!(
                "threshold0 must be positive and finite, got {}",
                self.threshold0
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!("scale must be positive and finite, got {s}")));
            }
        }
        match (self.method, self.a, self.window) {
            (Method::Tae, Some(a), None) => {
                if !(a > 1.0 && a.is_finite()) {
                    return Err(Error::config(format!("TAE requires a > 1, got {a}")));
                }
            }
            (Method::Mw, None, Some(w)) => {
                if w == 0 {
                    return Err(Error::config("MW window must be at least 1"));
                }
            }
            (Method::Sf | Method::Tbr, None, None) => {}
            (m, a, w) => {
                return Err(Error::config(format!(
                    "parameters do not match method {m}: a={a:?}, window={w:?}"
                )))
            }
        }
        Ok(())
    }
}

/// Spike train over {-1, 0, +1}, carrying the first source sample and encoder metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TernarySpikeTrain {
    values: Vec<i8>,
    init: f64,
    meta: EncoderMeta,
}

impl TernarySpikeTrain {
    pub fn new(values: Vec<i8>, init: f64, meta: EncoderMeta) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::domain(format!(
                "spike {i} has value {} outside {{-1, 0, 1}}",
                values[i]
            )));
        }
        if values.first().is_some_and(|&v| v != 0) {
            return Err(Error::domain("the first spike of an encoded train must be 0"));
        }
        if !init.is_finite() {
            return Err(Error::domain("init must be finite"));
        }
        meta.validate()?;
        Ok(Self { values, init, meta })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn init(&self) -> f64 {
        self.init
    }

    pub fn meta(&self) -> &EncoderMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_samples() {
        assert!(AnalogSignal::new(vec![0.0, f64::NAN], 1.0).is_err());
        assert!(AnalogSignal::new(vec![0.0, f64::INFINITY], 1.0).is_err());
        assert!(AnalogSignal::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn meta_parameters_must_match_method() {
        assert!(EncoderMeta::tae(0.1, 1.1, 1.0).validate().is_ok());
        assert!(EncoderMeta::tae(0.1, 1.0, 1.0).validate().is_err());
        assert!(EncoderMeta::mw(0.1, 0, 1.0).validate().is_err());
        let mut m = EncoderMeta::sf(0.1, 1.0);
        m.a = Some(1.1);
        assert!(m.validate().is_err());
        assert!(EncoderMeta::sf(0.0, 1.0).validate().is_err());
    }

    #[test]
    fn train_rejects_out_of_range_values() {
        let meta = EncoderMeta::sf(0.1, 1.0);
        assert!(TernarySpikeTrain::new(vec![0, 2], 0.0, meta.clone()).is_err());
        assert!(TernarySpikeTrain::new(vec![1, 0], 0.0, meta.clone()).is_err());
        assert!(TernarySpikeTrain::new(vec![0, -1, 1], 0.0, meta).is_ok());
    }

    #[test]
    fn peak_normalization_records_scale() {
        let s = AnalogSignal::new(vec![0.5, -2.0, 1.0], 8000.0).unwrap();
        let (n, scale) = s.peak_normalized();
        assert_eq!(scale, 2.0);
        assert_eq!(n.samples(), &[0.25, -1.0, 0.5]);
    }

    #[test]
    fn method_parses_case_insensitively() {
        assert_eq!("TAE".parse::<Method>().unwrap(), Method::Tae);
        assert_eq!("sf".parse::<Method>().unwrap(), Method::Sf);
        assert!("fft".parse::<Method>().is_err());
    }
}
