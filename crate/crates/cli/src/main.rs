mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Ternary spike encoding, quantized SNN inference and energy accounting.
#[derive(Parser)]
#[command(name = "ternspike", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a CSV or WAV signal into a spike-train file.
    Encode(EncodeArgs),
    /// Reconstruct a signal (CSV) from a spike-train file.
    Decode(DecodeArgs),
    /// Compare encoders on a synthetic corpus or a directory of signals.
    EvalEncoders(EvalArgs),
    /// Train the toy waveform classifier and export an integer model.
    Train(TrainArgs),
    /// Run an integer model on a spike file or raw signal.
    Infer(InferArgs),
    /// Energy report for a model or a counts file.
    Energy(EnergyArgs),
    /// Itemized memory footprint of a model.
    Mem(MemArgs),
}

/// Encoder parameters. Unset flags fall back to the config file, then defaults.
#[derive(Args, Serialize, Default)]
pub struct EncoderFlags {
    /// SF, TAE, TBR or MW.
    #[arg(long)]
    method: Option<String>,
    /// Initial threshold; defaults to the std of first differences.
    #[arg(long)]
    threshold: Option<f64>,
    /// TAE adaptation factor.
    #[arg(long)]
    a: Option<f64>,
    /// MW window length.
    #[arg(long)]
    window: Option<usize>,
    /// Sample rate attached to CSV input.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Peak-normalize the signal before encoding; the scale is kept in the spike file.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    normalize: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct EncodeArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[command(flatten)]
    encoder: EncoderFlags,
    /// JSON file with encoder settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct DecodeArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct EvalFlags {
    /// plateau_peak, multisine, chirp or square_saw_sine.
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Read every .csv/.wav file here instead of generating a corpus.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Initial threshold shared by all methods.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    /// Comma-separated methods.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    #[command(flatten)]
    flags: EvalFlags,
    /// CSV report path; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bits_w: Option<u32>,
    #[arg(long)]
    bits_u: Option<u32>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct TrainArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// JSON training config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// Output per-epoch metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// Spike-train file.
    #[arg(long, conflicts_with = "signal", required_unless_present = "signal")]
    spikes: Option<PathBuf>,
    /// Raw CSV/WAV signal, encoded with the encoder flags (TAE by default).
    #[arg(long)]
    signal: Option<PathBuf>,
    #[command(flatten)]
    encoder: EncoderFlags,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct EnergyFlags {
    /// Average firing rate; overrides any sparsity in the counts file.
    #[arg(long)]
    sparsity: Option<f64>,
    /// Timesteps; defaults to the model's T.
    #[arg(long)]
    timesteps: Option<u32>,
    /// Cost of one multiply-accumulate, pJ.
    #[arg(long)]
    e_mac: Option<f64>,
    /// Cost of one accumulate, pJ.
    #[arg(long)]
    e_ac: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct EnergyArgs {
    #[arg(long, conflicts_with = "counts", required_unless_present = "counts")]
    model: Option<PathBuf>,
    /// JSON operation counts.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[command(flatten)]
    flags: EnergyFlags,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the rows as CSV.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct MemFlags {
    /// Weight bits; defaults to the model's.
    #[arg(long)]
    bits_w: Option<u32>,
    /// Membrane bits; defaults to the model's.
    #[arg(long)]
    bits_u: Option<u32>,
    #[arg(long)]
    batch: Option<u32>,
    /// Bit width of the full-precision baseline.
    #[arg(long)]
    baseline_bits: Option<u32>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct MemArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    flags: MemFlags,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Encode(args) => commands::encode(args),
        Command::Decode(args) => commands::decode(args),
        Command::EvalEncoders(args) => commands::eval_encoders(args),
        Command::Train(args) => commands::train(args),
        Command::Infer(args) => commands::infer(args),
        Command::Energy(args) => commands::energy(args),
        Command::Mem(args) => commands::mem(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
