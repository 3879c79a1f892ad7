//! Reconstruction error, firing rate and symbol entropy.

use crate::error::{Error, Result};
use crate::signal::{AnalogSignal, TernarySpikeTrain};

/// Mean absolute error between two equal-length signals.
pub fn mae(a: &AnalogSignal, b: &AnalogSignal) -> Result<f64> {
    mae_slices(a.samples(), b.samples())
}

pub fn mae_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "mae over signals of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::domain("mae of empty signals"));
    }
    let total: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

/// Fraction of nonzero entries.
pub fn firing_rate(train: &TernarySpikeTrain) -> Result<f64> {
    spike_fraction(train.values())
}

pub fn spike_fraction(values: &[i8]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("firing rate of an empty train"));
    }
    let active = values.iter().filter(|&&v| v != 0).count();
    Ok(active as f64 / values.len() as f64)
}

/// Plug-in Shannon entropy (bits) of the {-1, 0, +1} symbol frequencies.
pub fn empirical_entropy(train: &TernarySpikeTrain) -> Result<f64> {
    symbol_entropy(train.values())
}

pub fn symbol_entropy(values: &[i8]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("entropy of an empty train"));
    }
    let mut counts = [0usize; 3];
    for &v in values {
        counts[(v + 1) as usize] += 1;
    }
    let n = values.len() as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    // a single-symbol train gives -0.0
    Ok(h.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::EncoderMeta;

    fn train(values: Vec<i8>) -> TernarySpikeTrain {
        TernarySpikeTrain::new(values, 0.0, EncoderMeta::sf(0.1, 1.0)).unwrap()
    }

    fn sig(v: Vec<f64>) -> AnalogSignal {
        AnalogSignal::new(v, 100.0).unwrap()
    }

    #[test]
    fn mae_examples() {
        let a = sig(vec![0.0, 1.0]);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &sig(vec![1.0, 1.0])).unwrap(), 0.5);

        let s: Vec<f64> = (0..100)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 100.0).sin())
            .collect();
        let shifted: Vec<f64> = s.iter().map(|x| x + 0.1).collect();
        let m = mae(&sig(s), &sig(shifted)).unwrap();
        assert!((m - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mae_errors() {
        assert!(matches!(
            mae(&sig(vec![0.0]), &sig(vec![0.0, 1.0])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            mae(&sig(vec![]), &sig(vec![])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn firing_rate_examples() {
        assert_eq!(firing_rate(&train(vec![0, 0, 0])).unwrap(), 0.0);
        assert_eq!(firing_rate(&train(vec![0, 1, -1, 0])).unwrap(), 0.5);
        assert!(firing_rate(&train(vec![])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(empirical_entropy(&train(vec![0; 10])).unwrap(), 0.0);
        let binary: Vec<i8> = (0..1000).map(|i| (i % 2) as i8).collect();
        assert!((empirical_entropy(&train(binary)).unwrap() - 1.0).abs() < 1e-12);
        let ternary: Vec<i8> = (0..999).map(|i| [0, 1, -1][i % 3]).collect();
        let h = empirical_entropy(&train(ternary)).unwrap();
        assert!((h - 3f64.log2()).abs() < 1e-12);
        assert!(empirical_entropy(&train(vec![])).is_err());
    }
}
