//! On-disk formats: spike-train text files, signal CSV/WAV, and model JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qtsnn::QtLayer;
use crate::signal::{AnalogSignal, EncoderMeta, Method, TernarySpikeTrain};
use crate::topology::LayerShape;

pub const SPIKE_MAGIC: &str = "#ternspike v1";
pub const MODEL_VERSION: u32 = 1;
pub const READOUT_SPIKE_SUM: &str = "spike_sum";

/// 17 significant digits: enough to round-trip any `f64`.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a spike train in the text format: magic line, one-line JSON
/// header, then one value per line.
pub fn spike_file_string(train: &TernarySpikeTrain) -> String {
    let meta = train.meta();
    let mut header = format!(
        "{{\"method\":\"{}\",\"init\":{},\"threshold0\":{}",
        meta.method,
        real(train.init()),
        real(meta.threshold0)
    );
    if let Some(a) = meta.a {
        header.push_str(&format!(",\"a\":{}", real(a)));
    }
    if let Some(w) = meta.window {
        header.push_str(&format!(",\"window\":{w}"));
    }
    if let Some(s) = meta.scale {
        header.push_str(&format!(",\"scale\":{}", real(s)));
    }
    header.push_str(&format!(
        ",\"sample_rate\":{},\"length\":{}}}",
        real(meta.sample_rate),
        train.len()
    ));

    let mut out = String::with_capacity(header.len() + 3 * train.len() + 32);
    out.push_str(SPIKE_MAGIC);
    out.push('\n');
    out.push_str(&header);
    out.push('\n');
    for v in train.values() {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpikeHeader {
    method: Method,
    init: f64,
    threshold0: f64,
    #[serde(default)]
    a: Option<f64>,
    #[serde(default)]
    window: Option<usize>,
    #[serde(default)]
    scale: Option<f64>,
    sample_rate: f64,
    length: usize,
}

/// Parses the spike-train text format. `path` only labels diagnostics.
pub fn parse_spike_file(text: &str, path: &Path) -> Result<TernarySpikeTrain> {
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, SPIKE_MAGIC)) => {}
        _ => return Err(Error::parse(path, 1, format!("expected '{SPIKE_MAGIC}'"))),
    }
    let header_line = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| Error::parse(path, 2, "missing header"))?;
    let header: SpikeHeader =
        serde_json::from_str(header_line).map_err(|e| Error::parse(path, 2, e.to_string()))?;

    let mut values = Vec::with_capacity(header.length);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let v = match line {
            "" => continue,
            "-1" => -1,
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected -1, 0 or 1, found '{other}'"),
                ))
            }
        };
        values.push(v);
    }
    if values.len() != header.length {
        return Err(Error::parse(
            path,
            2,
            format!("header declares {} values, body has {}", header.length, values.len()),
        ));
    }
    let meta = EncoderMeta {
        method: header.method,
        threshold0: header.threshold0,
        a: header.a,
        window: header.window,
        sample_rate: header.sample_rate,
        scale: header.scale,
    };
    TernarySpikeTrain::new(values, header.init, meta)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_spike_file(path: &Path, train: &TernarySpikeTrain) -> Result<()> {
    write_text(path, &spike_file_string(train))
}

pub fn read_spike_file(path: &Path) -> Result<TernarySpikeTrain> {
    parse_spike_file(&read_text(path)?, path)
}

/// One sample per line. Blank lines and `#` comments are skipped.
pub fn parse_signal_csv(text: &str, path: &Path, sample_rate: f64) -> Result<AnalogSignal> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x: f64 = line
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("not a number: '{line}'")))?;
        if !x.is_finite() {
            return Err(Error::parse(path, idx + 1, format!("non-finite sample '{line}'")));
        }
        samples.push(x);
    }
    if samples.is_empty() {
        return Err(Error::parse(path, 1, "no samples"));
    }
    AnalogSignal::new(samples, sample_rate)
}

/// Writes one sample per line using the shortest exact representation.
pub fn signal_csv_string(signal: &AnalogSignal) -> String {
    let mut out = String::new();
    for x in signal.samples() {
        out.push_str(&format!("{x:?}\n"));
    }
    out
}

pub fn write_signal_csv(path: &Path, signal: &AnalogSignal) -> Result<()> {
    write_text(path, &signal_csv_string(signal))
}

/// Reads 16-bit PCM mono WAV, scaled to `[-1, 1)` by 1/32768.
pub fn read_wav(path: &Path) -> Result<AnalogSignal> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::io(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Unsupported(format!(
            "{}: {} channels; only mono WAV is supported",
            path.display(),
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Unsupported(format!(
            "{}: only 16-bit PCM WAV is supported",
            path.display()
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::io(path, e))?;
    if samples.is_empty() {
        return Err(Error::parse(path, 1, "WAV file has no samples"));
    }
    AnalogSignal::new(samples, f64::from(spec.sample_rate))
}

/// Reads a `.wav` file, or otherwise a CSV at `csv_sample_rate`.
pub fn read_signal(path: &Path, csv_sample_rate: f64) -> Result<AnalogSignal> {
    let is_wav = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        read_wav(path)
    } else {
        parse_signal_csv(&read_text(path)?, path, csv_sample_rate)
    }
}

/// One layer of the model file. Integer fields are authoritative; `theta_f`
/// and `alpha_w` record where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: String,
    pub fan_in: usize,
    pub fan_out: usize,
    pub bits_w: u32,
    pub bits_u: u32,
    pub k: i32,
    pub theta: i32,
    pub w_int: Vec<i32>,
    #[serde(default)]
    pub theta_f: Option<f64>,
    #[serde(default)]
    pub alpha_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

impl LayerRecord {
    pub fn from_layer(layer: &QtLayer) -> Self {
        let mut rec = Self {
            kind: layer.shape.kind_name().to_string(),
            fan_in: layer.fan_in(),
            fan_out: layer.fan_out(),
            bits_w: layer.bits_w,
            bits_u: layer.bits_u,
            k: layer.k,
            theta: layer.theta,
            w_int: layer.w_int.clone(),
            theta_f: layer.theta_f,
            alpha_w: layer.alpha_w,
            in_channels: None,
            out_channels: None,
            in_len: None,
            kernel: None,
            stride: None,
        };
        if let LayerShape::Conv1d {
            in_channels,
            out_channels,
            in_len,
            kernel,
            stride,
        } = layer.shape
        {
            rec.in_channels = Some(in_channels);
            rec.out_channels = Some(out_channels);
            rec.in_len = Some(in_len);
            rec.kernel = Some(kernel);
            rec.stride = Some(stride);
        }
        rec
    }

    pub fn to_layer(&self) -> Result<QtLayer> {
        let shape = match self.kind.as_str() {
            "dense" => LayerShape::dense(self.fan_in, self.fan_out),
            "conv1d" => {
                let need = |v: Option<usize>, name: &str| {
                    v.ok_or_else(|| Error::config(format!("conv1d layer is missing '{name}'")))
                };
                LayerShape::conv1d(
                    need(self.in_channels, "in_channels")?,
                    need(self.out_channels, "out_channels")?,
                    need(self.in_len, "in_len")?,
                    need(self.kernel, "kernel")?,
                    need(self.stride, "stride")?,
                )
            }
            other => return Err(Error::config(format!("unknown layer kind '{other}'"))),
        };
        if shape.input_size() != self.fan_in || shape.output_size() != self.fan_out {
            return Err(Error::dim(format!(
                "{} layer declares {} -> {}, its shape gives {} -> {}",
                self.kind,
                self.fan_in,
                self.fan_out,
                shape.input_size(),
                shape.output_size()
            )));
        }
        let mut layer = QtLayer::new(shape, self.w_int.clone(), self.k, self.theta, self.bits_w, self.bits_u)?;
        layer.theta_f = self.theta_f;
        layer.alpha_w = self.alpha_w;
        Ok(layer)
    }
}

/// A deployable integer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub layers: Vec<LayerRecord>,
    #[serde(rename = "T")]
    pub timesteps: usize,
    pub readout: String,
}

impl ModelFile {
    pub fn new(layers: &[QtLayer], timesteps: usize) -> Self {
        Self {
            version: MODEL_VERSION,
            layers: layers.iter().map(LayerRecord::from_layer).collect(),
            timesteps,
            readout: READOUT_SPIKE_SUM.to_string(),
        }
    }

    /// Validated integer layers.
    pub fn qt_layers(&self) -> Result<Vec<QtLayer>> {
        if self.version != MODEL_VERSION {
            return Err(Error::Unsupported(format!("model version {}", self.version)));
        }
        if self.readout != READOUT_SPIKE_SUM {
            return Err(Error::Unsupported(format!("readout '{}'", self.readout)));
        }
        if self.timesteps == 0 {
            return Err(Error::config("model T must be positive"));
        }
        let layers = self.layers.iter().map(LayerRecord::to_layer).collect::<Result<Vec<_>>>()?;
        let shapes: Vec<LayerShape> = layers.iter().map(|l| l.shape).collect();
        crate::topology::check_chain(&shapes)?;
        Ok(layers)
    }

    pub fn shapes(&self) -> Result<Vec<LayerShape>> {
        Ok(self.qt_layers()?.iter().map(|l| l.shape).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model records always serialize")
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &(self.to_json() + "\n"))
    }
}
