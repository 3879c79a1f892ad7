use serde::Serialize;

use super::{decode, encode_mw, encode_sf, encode_tae, encode_tbr, EncoderTrace};
use crate::error::{Error, Result};
use crate::metrics::{empirical_entropy, firing_rate, mae};
use crate::signal::{AnalogSignal, EncoderMeta, Method, TernarySpikeTrain};

/// Aggregate statistics of one encoder configuration over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub threshold0: f64,
    pub a: Option<f64>,
    pub window: Option<usize>,
    pub signals: usize,
    /// `None` for MW, which has no decoder.
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub firing_rate_mean: f64,
    pub entropy_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, method: Method) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,threshold0,a,window,signals,mae_mean,mae_std,firing_rate_mean,entropy_mean\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{:.6}\n",
                r.method,
                r.threshold0,
                r.a.map(|a| a.to_string()).unwrap_or_default(),
                r.window.map(|w| w.to_string()).unwrap_or_default(),
                r.signals,
                opt(r.mae_mean),
                opt(r.mae_std),
                r.firing_rate_mean,
                r.entropy_mean,
            ));
        }
        out
    }
}

/// Runs the encoder described by `meta` over `signal`. The metadata's sample
/// rate is replaced by the signal's own.
pub fn encode_with(signal: &AnalogSignal, meta: &EncoderMeta) -> Result<(TernarySpikeTrain, EncoderTrace)> {
    match meta.method {
        Method::Sf => encode_sf(signal, meta.threshold0),
        Method::Tbr => encode_tbr(signal, meta.threshold0),
        Method::Tae => encode_tae(
            signal,
            meta.threshold0,
            meta.a
                .ok_or_else(|| Error::config("TAE config is missing the adaptation factor"))?,
        ),
        Method::Mw => encode_mw(
            signal,
            meta.threshold0,
            meta.window
                .ok_or_else(|| Error::config("MW config is missing the window"))?,
        ),
    }
}

/// Encodes every signal with every configuration and summarizes reconstruction
/// error, firing rate and entropy. Rows are ordered by method name, ties keep
/// the order of `configs`.
pub fn compare_encoders(corpus: &[AnalogSignal], configs: &[EncoderMeta]) -> Result<ComparisonReport> {
    if configs.is_empty() {
        return Ok(ComparisonReport::default());
    }
    if corpus.is_empty() {
        return Err(Error::domain("comparison corpus is empty"));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for meta in configs {
        meta.validate()?;
        let mut maes = Vec::with_capacity(corpus.len());
        let mut rate_sum = 0.0;
        let mut entropy_sum = 0.0;
        for signal in corpus {
            let (train, _) = encode_with(signal, meta)?;
            rate_sum += firing_rate(&train)?;
            entropy_sum += empirical_entropy(&train)?;
            if meta.method != Method::Mw {
                maes.push(mae(&decode(&train)?, signal)?);
            }
        }
        let n = corpus.len() as f64;
        let (mae_mean, mae_std) = if maes.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&maes);
            (Some(m), Some(s))
        };
        rows.push(ComparisonRow {
            method: meta.method,
            threshold0: meta.threshold0,
            a: meta.a,
            window: meta.window,
            signals: corpus.len(),
            mae_mean,
            mae_std,
            firing_rate_mean: rate_sum / n,
            entropy_mean: entropy_sum / n,
        });
    }
    rows.sort_by(|x, y| x.method.name().cmp(y.method.name()));
    Ok(ComparisonReport { rows })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_corpus, CorpusKind};

    #[test]
    fn tae_beats_sf_on_plateau_peak() {
        let corpus = gen_corpus(CorpusKind::PlateauPeak, 20, 2000, 42).unwrap();
        let configs = [EncoderMeta::sf(0.05, 1000.0), EncoderMeta::tae(0.05, 1.1, 1000.0)];
        let report = compare_encoders(&corpus, &configs).unwrap();
        let sf = report.row(Method::Sf).unwrap();
        let tae = report.row(Method::Tae).unwrap();
        assert!(tae.mae_mean.unwrap() < sf.mae_mean.unwrap());
    }

    #[test]
    fn constant_signal_reports_zero() {
        let corpus = vec![AnalogSignal::new(vec![0.25; 100], 1000.0).unwrap()];
        let configs = [
            EncoderMeta::sf(0.1, 1000.0),
            EncoderMeta::tae(0.1, 1.1, 1000.0),
            EncoderMeta::tbr(0.1, 1000.0),
            EncoderMeta::mw(0.1, 4, 1000.0),
        ];
        let report = compare_encoders(&corpus, &configs).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert_eq!(row.firing_rate_mean, 0.0);
            match row.method {
                Method::Mw => assert!(row.mae_mean.is_none()),
                _ => assert_eq!(row.mae_mean, Some(0.0)),
            }
        }
        let names: Vec<_> = report.rows.iter().map(|r| r.method.name()).collect();
        assert_eq!(names, ["MW", "SF", "TAE", "TBR"]);
    }

    #[test]
    fn empty_config_list_gives_empty_report() {
        let corpus = gen_corpus(CorpusKind::Chirp, 2, 50, 1).unwrap();
        assert!(compare_encoders(&corpus, &[]).unwrap().rows.is_empty());
    }
}
