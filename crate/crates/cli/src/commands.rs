use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ternspike_core::corpus::{gen_corpus, CorpusKind};
use ternspike_core::encoders::{compare_encoders, decode as decode_train, encode_with, DEFAULT_TAE_A};
use ternspike_core::energy::{
    energy_ann, energy_dc_snn, energy_qtsnn, memory_footprint, EnergyCosts, OpCountReport, E_AC_PJ, E_MAC_PJ,
};
use ternspike_core::formats::{read_signal, read_spike_file, write_signal_csv, write_spike_file, ModelFile};
use ternspike_core::metrics::{empirical_entropy, firing_rate};
use ternspike_core::qtsnn::qt_forward;
use ternspike_core::topology::LayerShape;
use ternspike_core::training::{export_for_inference, metrics_csv, reshape_spikes, train_toy, TrainConfig};
use ternspike_core::{AnalogSignal, EncoderMeta, Error, Method, Result, TernarySpikeTrain};

use crate::config::resolve;
use crate::{DecodeArgs, EncodeArgs, EnergyArgs, EvalArgs, InferArgs, MemArgs, TrainArgs};

const CSV_SAMPLE_RATE: f64 = 1000.0;
const DEFAULT_MW_WINDOW: usize = 4;

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EncoderSettings {
    method: String,
    threshold: Option<f64>,
    a: f64,
    window: usize,
    sample_rate: f64,
    normalize: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self {
            method: "TAE".into(),
            threshold: None,
            a: DEFAULT_TAE_A,
            window: DEFAULT_MW_WINDOW,
            sample_rate: CSV_SAMPLE_RATE,
            normalize: false,
        }
    }
}

impl EncoderSettings {
    fn meta_for(&self, signal: &AnalogSignal) -> Result<EncoderMeta> {
        let method: Method = self.method.parse()?;
        let th = self.threshold.unwrap_or_else(|| signal.default_threshold());
        let sr = signal.sample_rate();
        let meta = match method {
            Method::Sf => EncoderMeta::sf(th, sr),
            Method::Tbr => EncoderMeta::tbr(th, sr),
            Method::Tae => EncoderMeta::tae(th, self.a, sr),
            Method::Mw => EncoderMeta::mw(th, self.window, sr),
        };
        meta.validate()?;
        Ok(meta)
    }

    fn encode(&self, signal: &AnalogSignal) -> Result<TernarySpikeTrain> {
        if !self.normalize {
            return Ok(encode_with(signal, &self.meta_for(signal)?)?.0);
        }
        let (normalized, scale) = signal.peak_normalized();
        let train = encode_with(&normalized, &self.meta_for(&normalized)?)?.0;
        let meta = EncoderMeta {
            scale: Some(scale),
            ..train.meta().clone()
        };
        TernarySpikeTrain::new(train.values().to_vec(), train.init(), meta)
    }
}

pub fn encode(args: EncodeArgs) -> Result<()> {
    let settings: EncoderSettings = resolve(&args.encoder, args.config.as_deref())?;
    let signal = read_signal(&args.input, settings.sample_rate)?;
    let train = settings.encode(&signal)?;
    write_spike_file(&args.output, &train)?;
    println!("length {}", train.len());
    println!("firing_rate {:.3}", firing_rate(&train)?);
    println!("entropy_bits {:.3}", empirical_entropy(&train)?);
    if let Some(scale) = train.meta().scale {
        println!("scale {scale}");
    }
    Ok(())
}

pub fn decode(args: DecodeArgs) -> Result<()> {
    let train = read_spike_file(&args.input)?;
    let mut signal = decode_train(&train)?;
    if let Some(scale) = train.meta().scale {
        let samples = signal.samples().iter().map(|x| x * scale).collect();
        signal = AnalogSignal::new(samples, signal.sample_rate())?;
    }
    write_signal_csv(&args.output, &signal)
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalSettings {
    corpus: String,
    n: usize,
    length: usize,
    seed: u64,
    dir: Option<PathBuf>,
    sample_rate: f64,
    threshold: f64,
    a: f64,
    window: usize,
    methods: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            corpus: "plateau_peak".into(),
            n: 20,
            length: 2000,
            seed: 42,
            dir: None,
            sample_rate: CSV_SAMPLE_RATE,
            threshold: 0.05,
            a: DEFAULT_TAE_A,
            window: DEFAULT_MW_WINDOW,
            methods: "SF,TAE,TBR,MW".into(),
        }
    }
}

fn signals_in(dir: &Path, sample_rate: f64) -> Result<Vec<AnalogSignal>> {
    let io = |e: std::io::Error| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .map(|entry| entry.map(|e| e.path()).map_err(io))
        .collect::<Result<Vec<_>>>()?;
    paths.retain(|p| {
        p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("wav"))
    });
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("{} holds no .csv or .wav files", dir.display())));
    }
    paths.iter().map(|p| read_signal(p, sample_rate)).collect()
}

pub fn eval_encoders(args: EvalArgs) -> Result<()> {
    let s: EvalSettings = resolve(&args.flags, args.config.as_deref())?;
    let corpus = match &s.dir {
        Some(dir) => signals_in(dir, s.sample_rate)?,
        None => gen_corpus(s.corpus.parse::<CorpusKind>()?, s.n, s.length, s.seed)?,
    };
    let sr = corpus[0].sample_rate();
    let configs = s
        .methods
        .split(',')
        .map(|m| {
            Ok(match m.trim().parse::<Method>()? {
                Method::Sf => EncoderMeta::sf(s.threshold, sr),
                Method::Tbr => EncoderMeta::tbr(s.threshold, sr),
                Method::Tae => EncoderMeta::tae(s.threshold, s.a, sr),
                Method::Mw => EncoderMeta::mw(s.threshold, s.window, sr),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = compare_encoders(&corpus, &configs)?.to_csv();
    match &args.output {
        Some(path) => write_file(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg: TrainConfig = resolve(&args.flags, args.config.as_deref())?;
    let outcome = train_toy(&cfg)?;
    let layers = export_for_inference(&outcome.model)?;
    ModelFile::new(&layers, cfg.timesteps).write(&args.model)?;
    if let Some(path) = &args.metrics {
        write_file(path, &metrics_csv(&outcome.history))?;
    }
    let last = outcome.final_metrics();
    println!("epochs {}", last.epoch);
    println!("train_loss {:.6}", last.train_loss);
    println!("train_acc {:.4}", last.train_acc);
    println!("test_acc {:.4}", last.test_acc);
    Ok(())
}

pub fn infer(args: InferArgs) -> Result<()> {
    let model = ModelFile::read(&args.model)?;
    let layers = model.qt_layers()?;
    let train = match (&args.spikes, &args.signal) {
        (Some(path), _) => read_spike_file(path)?,
        (None, Some(path)) => {
            let settings: EncoderSettings = resolve(&args.encoder, args.config.as_deref())?;
            settings.encode(&read_signal(path, settings.sample_rate)?)?
        }
        (None, None) => return Err(Error::Config("either --spikes or --signal is required".into())),
    };
    let inputs = reshape_spikes(train.values(), model.timesteps, layers[0].fan_in())?;
    let run = qt_forward(&layers, &inputs)?;
    let scores: Vec<String> = run.scores.iter().map(i64::to_string).collect();
    println!("class {}", run.predicted_class());
    println!("scores {}", scores.join(" "));
    println!("sparsity {:.6}", run.sparsity().overall);
    println!("ac_ops {}", run.total_ops().ac);
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EnergySettings {
    sparsity: Option<f64>,
    timesteps: Option<u32>,
    e_mac: f64,
    e_ac: f64,
}

impl Default for EnergySettings {
    fn default() -> Self {
        Self {
            sparsity: None,
            timesteps: None,
            e_mac: E_MAC_PJ,
            e_ac: E_AC_PJ,
        }
    }
}

/// Synaptic operation totals for a Table-style comparison.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsFile {
    #[serde(rename = "T", default)]
    timesteps: Option<u32>,
    #[serde(default)]
    sparsity: Option<f64>,
    /// Total MACs of the equivalent ANN.
    #[serde(default)]
    ann: Option<f64>,
    #[serde(default)]
    dc_snn: Option<DcCounts>,
    #[serde(default)]
    qtsnn: Option<QtCounts>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DcCounts {
    first_layer: f64,
    rest: f64,
    #[serde(default)]
    sparsity: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QtCounts {
    synapses: f64,
    #[serde(default)]
    sparsity: Option<f64>,
}

fn counts_report(totals: Vec<f64>, timesteps: u32, sparsity: f64) -> OpCountReport {
    OpCountReport {
        first_layer_fanin: totals.first().copied().unwrap_or(0.0),
        fan_in_total: totals.clone(),
        fan_out_total: totals,
        timesteps,
        sparsity,
        recorded_synops: None,
    }
}

fn check_sparsity(s: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&s) {
        Ok(s)
    } else {
        Err(Error::Domain(format!("sparsity must be in [0, 1], got {s}")))
    }
}

pub fn energy(args: EnergyArgs) -> Result<()> {
    let s: EnergySettings = resolve(&args.flags, args.config.as_deref())?;
    let costs = EnergyCosts {
        e_mac_pj: s.e_mac,
        e_ac_pj: s.e_ac,
    };
    if !(costs.e_mac_pj >= 0.0 && costs.e_ac_pj >= 0.0) {
        return Err(Error::Config("operation costs must be non-negative".into()));
    }
    let missing = |what: &str| Error::Config(format!("{what} is required (flag or counts file)"));
    let mut rows: Vec<(&str, f64)> = Vec::new();

    if let Some(path) = &args.counts {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let counts: CountsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let t = s.timesteps.or(counts.timesteps);
        let pick = |row: Option<f64>| s.sparsity.or(row).or(counts.sparsity);
        if let Some(macs) = counts.ann {
            rows.push(("ANN", energy_ann(&counts_report(vec![macs], 1, 0.0), &costs)));
        }
        if let Some(dc) = &counts.dc_snn {
            let t = t.ok_or_else(|| missing("T"))?;
            let sp = check_sparsity(pick(dc.sparsity).ok_or_else(|| missing("sparsity"))?)?;
            let report = counts_report(vec![dc.first_layer, dc.rest], t, sp);
            rows.push(("DC-SNN", energy_dc_snn(&report, &costs)));
        }
        if let Some(qt) = &counts.qtsnn {
            let t = t.ok_or_else(|| missing("T"))?;
            let sp = check_sparsity(pick(qt.sparsity).ok_or_else(|| missing("sparsity"))?)?;
            rows.push(("QT-SNN", energy_qtsnn(&counts_report(vec![qt.synapses], t, sp), &costs)));
        }
        if rows.is_empty() {
            return Err(Error::Config(format!("{} lists no counts", path.display())));
        }
    } else if let Some(path) = &args.model {
        let model = ModelFile::read(path)?;
        let shapes: Vec<LayerShape> = model.shapes()?;
        let t = s.timesteps.unwrap_or(model.timesteps as u32);
        let sp = check_sparsity(s.sparsity.ok_or_else(|| missing("sparsity"))?)?;
        let report = OpCountReport::from_shapes(&shapes, t, sp);
        rows.push(("ANN", energy_ann(&report, &costs)));
        rows.push(("DC-SNN", energy_dc_snn(&report, &costs)));
        rows.push(("QT-SNN", energy_qtsnn(&report, &costs)));
    }

    for (name, e) in &rows {
        println!("{name} {e:.2} µJ");
    }
    if let Some(path) = &args.output {
        let mut csv = String::from("model,energy_uj\n");
        for (name, e) in &rows {
            csv.push_str(&format!("{name},{e:.6}\n"));
        }
        write_file(path, &csv)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MemSettings {
    bits_w: Option<u32>,
    bits_u: Option<u32>,
    batch: u32,
    baseline_bits: u32,
}

impl Default for MemSettings {
    fn default() -> Self {
        Self {
            bits_w: None,
            bits_u: None,
            batch: 1,
            baseline_bits: 32,
        }
    }
}

pub fn mem(args: MemArgs) -> Result<()> {
    let s: MemSettings = resolve(&args.flags, args.config.as_deref())?;
    let model = ModelFile::read(&args.model)?;
    let layers = model.qt_layers()?;
    let shapes: Vec<LayerShape> = layers.iter().map(|l| l.shape).collect();
    let bits_w = s.bits_w.unwrap_or(layers[0].bits_w);
    let bits_u = s.bits_u.unwrap_or(layers[0].bits_u);
    for bits in [bits_w, bits_u, s.baseline_bits] {
        if !(1..=64).contains(&bits) {
            return Err(Error::Config(format!("bit width must be in 1..=64, got {bits}")));
        }
    }
    if s.batch == 0 {
        return Err(Error::Config("batch must be positive".into()));
    }
    let quant = memory_footprint(&shapes, bits_w, bits_u, s.batch);
    let base = memory_footprint(&shapes, s.baseline_bits, s.baseline_bits, s.batch);
    println!("weight_bytes {}", quant.weight_bytes);
    println!("sidecar_bytes {}", quant.sidecar_bytes);
    println!("membrane_bytes {}", quant.membrane_bytes);
    println!("total_bytes {}", quant.total());
    println!("baseline_total_bytes {}", base.total());
    println!("reduction_pct {:.2}", 100.0 * quant.reduction_vs(&base));
    Ok(())
}
