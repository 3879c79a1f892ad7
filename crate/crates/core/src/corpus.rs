//! Deterministic synthetic signal corpora.
//!
//! All generators draw from ChaCha8 seeded with `seed_from_u64`, so a given
//! `(kind, n, length, seed)` yields bit-identical output on every platform.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::AnalogSignal;

/// Nominal sample rate attached to generated signals.
pub const CORPUS_SAMPLE_RATE: f64 = 1000.0;

/// Number of classes in the labeled waveform corpus.
pub const WAVEFORM_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    /// Long near-flat stretches interrupted by sharp transients.
    PlateauPeak,
    Multisine,
    Chirp,
    /// Square (label 0), sawtooth (label 1) and sine (label 2) waves.
    SquareSawSine,
}

impl FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plateau_peak" => Ok(CorpusKind::PlateauPeak),
            "multisine" => Ok(CorpusKind::Multisine),
            "chirp" => Ok(CorpusKind::Chirp),
            "square_saw_sine" => Ok(CorpusKind::SquareSawSine),
            other => Err(Error::config(format!("unknown corpus kind '{other}'"))),
        }
    }
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusKind::PlateauPeak => "plateau_peak",
            CorpusKind::Multisine => "multisine",
            CorpusKind::Chirp => "chirp",
            CorpusKind::SquareSawSine => "square_saw_sine",
        })
    }
}

/// Generates `n` peak-normalized signals of `length` samples.
pub fn gen_corpus(kind: CorpusKind, n: usize, length: usize, seed: u64) -> Result<Vec<AnalogSignal>> {
    Ok(gen_labeled(kind, n, length, seed)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// Like [`gen_corpus`], also returning a class label per signal. Only
/// `SquareSawSine` carries meaningful labels (signal `i` has label `i % 3`);
/// the other kinds label everything 0.
pub fn gen_labeled(
    kind: CorpusKind,
    n: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<(AnalogSignal, usize)>> {
    if n == 0 || length == 0 {
        return Err(Error::config("corpus size and signal length must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (raw, label) = match kind {
                CorpusKind::PlateauPeak => (plateau_peak(&mut rng, length), 0),
                CorpusKind::Multisine => (multisine(&mut rng, length), 0),
                CorpusKind::Chirp => (chirp(&mut rng, length), 0),
                CorpusKind::SquareSawSine => {
                    let label = i % WAVEFORM_CLASSES;
                    (waveform(&mut rng, length, label), label)
                }
            };
            let signal = AnalogSignal::new(raw, CORPUS_SAMPLE_RATE)?;
            Ok((signal.peak_normalized().0, label))
        })
        .collect()
}

fn plateau_peak(rng: &mut ChaCha8Rng, length: usize) -> Vec<f64> {
    // piecewise-constant levels joined by raised-cosine ramps
    let n_levels = rng.random_range(2..=4usize);
    let levels: Vec<f64> = (0..n_levels).map(|_| rng.random_range(-0.3..0.3)).collect();
    let seg = length as f64 / n_levels as f64;
    let ramp = (length as f64 / 20.0).max(1.0);
    let mut out: Vec<f64> = (0..length)
        .map(|i| {
            let x = i as f64;
            let idx = ((x / seg) as usize).min(n_levels - 1);
            let start = idx as f64 * seg;
            let cur = levels[idx];
            if idx == 0 || x - start >= ramp {
                cur
            } else {
                let prev = levels[idx - 1];
                let w = 0.5 - 0.5 * (PI * (x - start) / ramp).cos();
                prev + (cur - prev) * w
            }
        })
        .collect();

    // slow low-amplitude ripple keeps the plateaus from being exactly flat
    let ripple_cycles = rng.random_range(0.5..2.0);
    let ripple_phase = rng.random_range(0.0..2.0 * PI);
    for (i, v) in out.iter_mut().enumerate() {
        *v += 0.01 * (2.0 * PI * ripple_cycles * i as f64 / length as f64 + ripple_phase).sin();
    }

    // sharp transients: one-sample rise, fast exponential decay; the first
    // fifth of the signal is left quiet
    let n_peaks = rng.random_range(2..=5usize);
    let lo = length / 5;
    if lo + 1 < length {
        for _ in 0..n_peaks {
            let pos = rng.random_range(lo..length);
            let height = rng.random_range(0.8..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let decay = rng.random_range(2.0..8.0);
            for (j, v) in out[pos..].iter_mut().enumerate() {
                let bump = height * (-(j as f64) / decay).exp();
                if bump.abs() < 1e-6 {
                    break;
                }
                *v += bump;
            }
        }
    }
    out
}

fn multisine(rng: &mut ChaCha8Rng, length: usize) -> Vec<f64> {
    let n = rng.random_range(3..=5usize);
    let comps: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(1.0..20.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    (0..length)
        .map(|i| {
            let t = i as f64 / length as f64;
            comps
                .iter()
                .map(|(amp, cyc, ph)| amp * (2.0 * PI * cyc * t + ph).sin())
                .sum()
        })
        .collect()
}

fn chirp(rng: &mut ChaCha8Rng, length: usize) -> Vec<f64> {
    let f0 = rng.random_range(0.5..3.0);
    let f1 = rng.random_range(10.0..40.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    (0..length)
        .map(|i| {
            let t = i as f64 / length as f64;
            (2.0 * PI * (f0 * t + 0.5 * (f1 - f0) * t * t) + phase).sin()
        })
        .collect()
}

fn waveform(rng: &mut ChaCha8Rng, length: usize, label: usize) -> Vec<f64> {
    let cycles = rng.random_range(1.0..3.0);
    // small jitter only: the ternary network is odd, so a class must not also
    // contain its own negation (a half-period shift)
    let phase = rng.random_range(0.0..0.1);
    let amp = rng.random_range(0.5..1.0);
    let noise = 0.02;
    (0..length)
        .map(|i| {
            let p = (cycles * i as f64 / length as f64 + phase).fract();
            let clean = match label {
                0 => {
                    if p < 0.5 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                1 => 2.0 * p - 1.0,
                _ => (2.0 * PI * p).sin(),
            };
            amp * clean + noise * rng.random_range(-1.0..1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = gen_corpus(CorpusKind::Multisine, 1, 100, 7).unwrap();
        let b = gen_corpus(CorpusKind::Multisine, 1, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_corpus(CorpusKind::Multisine, 1, 100, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn all_kinds_are_peak_normalized() {
        for kind in [
            CorpusKind::PlateauPeak,
            CorpusKind::Multisine,
            CorpusKind::Chirp,
            CorpusKind::SquareSawSine,
        ] {
            for s in gen_corpus(kind, 6, 500, 3).unwrap() {
                assert!((s.peak() - 1.0).abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn plateau_peak_has_flat_runs_and_sharp_steps() {
        let length = 2000;
        for seed in 0..20 {
            for s in gen_corpus(CorpusKind::PlateauPeak, 5, length, seed).unwrap() {
                let x = s.samples();
                let steps: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                let mut best = 0;
                let mut run = 0;
                for &d in &steps {
                    run = if d < 0.01 { run + 1 } else { 0 };
                    best = best.max(run);
                }
                // a run of k flat steps covers k + 1 samples
                assert!(best + 1 >= length / 10, "seed {seed}: flat run {best}");
                assert!(steps.iter().any(|&d| d > 0.5), "seed {seed}: no sharp step");
            }
        }
    }

    #[test]
    fn waveform_corpus_is_stratified() {
        let labeled = gen_labeled(CorpusKind::SquareSawSine, 30, 64, 1).unwrap();
        for class in 0..WAVEFORM_CLASSES {
            assert_eq!(labeled.iter().filter(|(_, l)| *l == class).count(), 10);
        }
    }

    #[test]
    fn rejects_bad_sizes_and_kinds() {
        assert!(gen_corpus(CorpusKind::Chirp, 0, 10, 1).is_err());
        assert!(gen_corpus(CorpusKind::Chirp, 1, 0, 1).is_err());
        assert!("radar".parse::<CorpusKind>().is_err());
    }
}
