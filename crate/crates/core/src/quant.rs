//! Symmetric uniform quantization and dual-scale calibration.
//!
//! `Q(alpha, b) = alpha * {0, ±1/n, ±2/n, ..., ±1}` with `n = 2^(b-1) - 1`.
//! A value is clipped to `[-alpha, alpha]` and projected to the nearest level,
//! ties rounding away from zero. The integer code of a level is its index
//! `level * n / alpha`.

use crate::error::{Error, Result};

/// Exponent range allowed for the weight/membrane scale ratio.
pub const K_MIN: i32 = -8;
pub const K_MAX: i32 = 8;

/// Percentile of `|x|` used by [`CalibrationMode::Percentile`].
pub const CALIBRATION_PERCENTILE: f64 = 99.9;

/// Largest supported bit width; integer codes must fit an `i32`.
pub const MAX_BITS: u32 = 31;

/// Nonzero levels per sign, `2^(b-1) - 1`.
pub fn levels_per_sign(bits: u32) -> Result<i64> {
    check_bits(bits)?;
    Ok((1i64 << (bits - 1)) - 1)
}

fn check_bits(bits: u32) -> Result<()> {
    if !(2..=MAX_BITS).contains(&bits) {
        return Err(Error::config(format!(
            "bit width must be in 2..={MAX_BITS}, got {bits}"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("alpha must be positive and finite, got {alpha}")));
    }
    Ok(())
}

/// Nearest lattice index of `x` after clipping, in `[-n, n]`.
pub fn quantize_index(x: f64, alpha: f64, bits: u32) -> Result<i64> {
    check_alpha(alpha)?;
    let n = levels_per_sign(bits)?;
    if x.is_nan() {
        return Err(Error::domain("cannot quantize NaN"));
    }
    let clipped = x.clamp(-alpha, alpha);
    // f64::round rounds half away from zero
    let idx = (clipped / alpha * n as f64).round() as i64;
    Ok(idx.clamp(-n, n))
}

/// Clips `x` to `[-alpha, alpha]` and returns the nearest level of `Q(alpha, bits)`.
pub fn quantize(x: f64, alpha: f64, bits: u32) -> Result<f64> {
    let idx = quantize_index(x, alpha, bits)?;
    from_int(idx, alpha, bits)
}

/// Real value of integer code `idx`.
pub fn from_int(idx: i64, alpha: f64, bits: u32) -> Result<f64> {
    check_alpha(alpha)?;
    let n = levels_per_sign(bits)?;
    if idx.abs() > n {
        return Err(Error::domain(format!("code {idx} outside [-{n}, {n}]")));
    }
    Ok(idx as f64 * alpha / n as f64)
}

/// Integer code of a lattice level. Values off the lattice (beyond a few ulps)
/// are rejected.
pub fn to_int(level: f64, alpha: f64, bits: u32) -> Result<i64> {
    check_alpha(alpha)?;
    let n = levels_per_sign(bits)?;
    let scaled = level * n as f64 / alpha;
    let idx = scaled.round();
    let tol = 4.0 * f64::EPSILON * n as f64;
    if !scaled.is_finite() || (scaled - idx).abs() > tol || idx.abs() > n as f64 {
        return Err(Error::domain(format!(
            "{level} is not a level of Q({alpha}, {bits})"
        )));
    }
    Ok(idx as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    MaxAbs,
    Percentile,
}

/// Chooses a clipping threshold for `tensor`. An all-zero tensor yields 1.
pub fn calibrate(tensor: &[f64], bits: u32, mode: CalibrationMode) -> Result<f64> {
    check_bits(bits)?;
    if tensor.is_empty() {
        return Err(Error::domain("cannot calibrate an empty tensor"));
    }
    if tensor.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("cannot calibrate a tensor with non-finite values"));
    }
    let alpha = match mode {
        CalibrationMode::MaxAbs => tensor.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        CalibrationMode::Percentile => {
            let mut mags: Vec<f64> = tensor.iter().map(|x| x.abs()).collect();
            mags.sort_by(f64::total_cmp);
            // linear interpolation between closest ranks
            let rank = CALIBRATION_PERCENTILE / 100.0 * (mags.len() - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            let frac = rank - lo as f64;
            mags[lo] + (mags[hi] - mags[lo]) * frac
        }
    };
    Ok(if alpha > 0.0 { alpha } else { 1.0 })
}

/// Snaps `alpha_w` to the nearest `alpha_u * 2^k`, `k` clamped to `[K_MIN, K_MAX]`.
pub fn constrain_dyadic(alpha_w: f64, alpha_u: f64) -> Result<(f64, i32)> {
    check_alpha(alpha_w)?;
    check_alpha(alpha_u)?;
    let k = (alpha_w / alpha_u).log2().round().clamp(K_MIN as f64, K_MAX as f64) as i32;
    Ok((alpha_u * 2f64.powi(k), k))
}

/// Weight and membrane quantization of one layer.
///
/// `alpha_w` and `alpha_u` are clipping thresholds. The integer inference path
/// works in units of one membrane step, `alpha_u / n_u`, and scales integer
/// weight codes by the step ratio `(alpha_w / n_w) / (alpha_u / n_u) = 2^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantConfig {
    pub bits_w: u32,
    pub bits_u: u32,
    pub alpha_w: f64,
    pub alpha_u: f64,
}

impl QuantConfig {
    pub fn new(bits_w: u32, bits_u: u32, alpha_w: f64, alpha_u: f64) -> Result<Self> {
        check_bits(bits_w)?;
        check_bits(bits_u)?;
        check_alpha(alpha_w)?;
        check_alpha(alpha_u)?;
        Ok(Self {
            bits_w,
            bits_u,
            alpha_w,
            alpha_u,
        })
    }

    /// Real value of one weight code.
    pub fn weight_step(&self) -> f64 {
        self.alpha_w / levels_per_sign(self.bits_w).expect("validated") as f64
    }

    /// Real value of one membrane code.
    pub fn membrane_step(&self) -> f64 {
        self.alpha_u / levels_per_sign(self.bits_u).expect("validated") as f64
    }

    /// Snaps `alpha_w` so the step ratio is an exact power of two. Returns the
    /// adjusted config and `k`.
    pub fn dyadic(&self) -> Result<(QuantConfig, i32)> {
        let (step_w, k) = constrain_dyadic(self.weight_step(), self.membrane_step())?;
        let n_w = levels_per_sign(self.bits_w)? as f64;
        Ok((
            QuantConfig {
                alpha_w: step_w * n_w,
                ..*self
            },
            k,
        ))
    }

    /// Exponent of the step ratio if it is an exact power of two within range.
    pub fn k(&self) -> Option<i32> {
        let ratio = self.weight_step() / self.membrane_step();
        let k = ratio.log2().round();
        if (K_MIN as f64..=K_MAX as f64).contains(&k) && 2f64.powi(k as i32) == ratio {
            Some(k as i32)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.4, 1.0, 3).unwrap(), 1.0 / 3.0);
        assert_eq!(quantize(5.0, 1.0, 3).unwrap(), 1.0);
        assert_eq!(quantize(-0.6, 1.0, 2).unwrap(), -1.0);
    }

    #[test]
    fn ties_round_away_from_zero() {
        // b=2 levels are {-1, 0, 1}; 0.5 sits halfway
        assert_eq!(quantize(0.5, 1.0, 2).unwrap(), 1.0);
        assert_eq!(quantize(-0.5, 1.0, 2).unwrap(), -1.0);
    }

    #[test]
    fn one_bit_is_rejected() {
        assert!(matches!(quantize(0.1, 1.0, 1), Err(Error::Config(_))));
        assert!(quantize(0.1, 0.0, 3).is_err());
    }

    #[test]
    fn to_int_examples() {
        assert_eq!(to_int(1.0 / 3.0, 1.0, 3).unwrap(), 1);
        assert_eq!(to_int(0.0, 0.7, 5).unwrap(), 0);
        assert_eq!(to_int(-0.7, 0.7, 5).unwrap(), -15);
        assert!(matches!(to_int(0.2, 1.0, 3), Err(Error::Domain(_))));
        assert!(to_int(2.0, 1.0, 3).is_err());
    }

    #[test]
    fn round_trip_every_level() {
        for bits in 2..=8 {
            for alpha in [0.25, 1.0, 0.3, 7.1] {
                let n = levels_per_sign(bits).unwrap();
                for idx in -n..=n {
                    let level = from_int(idx, alpha, bits).unwrap();
                    assert_eq!(to_int(level, alpha, bits).unwrap(), idx);
                    assert_eq!(quantize(level, alpha, bits).unwrap(), level);
                }
            }
        }
    }

    #[test]
    fn calibrate_examples() {
        assert_eq!(calibrate(&[0.5, -2.0, 1.0], 4, CalibrationMode::MaxAbs).unwrap(), 2.0);
        assert_eq!(calibrate(&[0.0; 5], 4, CalibrationMode::MaxAbs).unwrap(), 1.0);
        assert_eq!(calibrate(&[0.0; 5], 4, CalibrationMode::Percentile).unwrap(), 1.0);
        assert!(calibrate(&[], 4, CalibrationMode::MaxAbs).is_err());
    }

    #[test]
    fn dyadic_examples() {
        assert_eq!(constrain_dyadic(4.0, 1.0).unwrap(), (4.0, 2));
        assert_eq!(constrain_dyadic(3.0, 1.0).unwrap(), (4.0, 2));
        assert_eq!(constrain_dyadic(1.0, 1.0).unwrap(), (1.0, 0));
        assert_eq!(constrain_dyadic(1e6, 1.0).unwrap().1, K_MAX);
        assert_eq!(constrain_dyadic(1e-6, 1.0).unwrap().1, K_MIN);
    }

    #[test]
    fn quant_config_k() {
        let q = QuantConfig::new(4, 4, 4.0, 1.0).unwrap();
        assert_eq!(q.k(), Some(2));
        let q = QuantConfig::new(4, 4, 3.0, 1.0).unwrap();
        assert_eq!(q.k(), None);
        let (d, k) = q.dyadic().unwrap();
        assert_eq!(k, 2);
        assert_eq!(d.k(), Some(2));
        assert!((d.alpha_w - 4.0).abs() < 1e-12);
    }
}
