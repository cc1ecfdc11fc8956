//! Achievable NOMA and OMA rates in bits/s/Hz and the NOMA-over-OMA gain.
//!
//! All rates are written in terms of the received SNR `|h|^2 / sigma^2`.
//! Each user's NOMA rate is discounted by its own misclassification
//! probability: the SIC user by the chance it skips SIC, the non-SIC user by
//! the chance it performs SIC.

use crate::analysis::ErrorProbabilities;
use crate::error::{param, Result};

/// Power shares `(gamma_k, gamma_n)` with `gamma_k + gamma_n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PowerSplit {
    gamma_k: f64,
    gamma_n: f64,
}

impl PowerSplit {
    pub fn from_gamma_n(gamma_n: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma_n) {
            return param(format!("gamma_n {gamma_n} outside [0, 1]"));
        }
        Ok(Self { gamma_k: 1.0 - gamma_n, gamma_n })
    }

    pub fn gamma_k(&self) -> f64 {
        self.gamma_k
    }

    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }
}

/// NOMA rates of the non-SIC user `k` and the SIC user `n`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RatePair {
    pub r_nonsic: f64,
    pub r_sic: f64,
}

impl RatePair {
    pub fn new(snr_k: f64, snr_n: f64, split: PowerSplit) -> Self {
        Self { r_nonsic: rate_nonsic(snr_k, split), r_sic: rate_sic(snr_n, split) }
    }

    pub fn min(&self) -> f64 {
        self.r_nonsic.min(self.r_sic)
    }
}

/// Rate of the non-SIC user, which treats the SIC user's signal as noise.
pub fn rate_nonsic(snr_k: f64, split: PowerSplit) -> f64 {
    (1.0 + snr_k * split.gamma_k / (snr_k * split.gamma_n + 1.0)).log2()
}

/// Rate of the SIC user after cancelling the non-SIC user's signal.
pub fn rate_sic(snr_n: f64, split: PowerSplit) -> f64 {
    (1.0 + snr_n * split.gamma_n).log2()
}

/// Rate on half of the orthogonal resource.
pub fn rate_oma(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// Lower bound of the sum-rate gain when both error probabilities are at
/// most `p_t`.
pub fn gain_lower_bound(snr_k: f64, snr_n: f64, split: PowerSplit, p_t: f64) -> f64 {
    (rate_sic(snr_n, split) + rate_nonsic(snr_k, split)) * (1.0 - p_t) - rate_oma(snr_n) - rate_oma(snr_k)
}

/// Lemma threshold on the non-SIC user's SNR: the gain bound grows with
/// `snr_k` below it and shrinks above it.
pub fn nonsic_snr_threshold(gamma_n: f64, p_t: f64) -> f64 {
    (1.0 - 2.0 * gamma_n - 2.0 * p_t + 2.0 * gamma_n * p_t) / gamma_n
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GainReport {
    pub delta_n: f64,
    pub delta_k: f64,
    pub delta_total: f64,
    pub lower_bound: f64,
}

pub fn gain_report(snr_k: f64, snr_n: f64, split: PowerSplit, errs: ErrorProbabilities, p_t: f64) -> GainReport {
    let delta_n = rate_sic(snr_n, split) * (1.0 - errs.p_sic_as_nonsic) - rate_oma(snr_n);
    let delta_k = rate_nonsic(snr_k, split) * (1.0 - errs.p_nonsic_as_sic) - rate_oma(snr_k);
    GainReport {
        delta_n,
        delta_k,
        delta_total: delta_n + delta_k,
        lower_bound: gain_lower_bound(snr_k, snr_n, split, p_t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    fn split(gamma_n: f64) -> PowerSplit {
        PowerSplit::from_gamma_n(gamma_n).unwrap()
    }

    #[test]
    fn split_validation() {
        assert!(PowerSplit::from_gamma_n(-0.1).is_err());
        assert!(PowerSplit::from_gamma_n(1.1).is_err());
        let s = split(0.3);
        assert!((s.gamma_k() + s.gamma_n() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonsic_rate_values() {
        assert_eq!(rate_nonsic(10.0, split(1.0)), 0.0);
        assert!((rate_nonsic(10.0, split(0.0)) - 11f64.log2()).abs() < 1e-15);
        // 1 + 8 / 3 = 11 / 3
        let r = rate_nonsic(10.0, split(0.2));
        assert!((r - (11.0f64 / 3.0).log2()).abs() < 1e-14);
        assert!((r - 1.8745).abs() < 5e-5);
    }

    #[test]
    fn sic_rate_values() {
        assert_eq!(rate_sic(50.0, split(0.0)), 0.0);
        assert!((rate_sic(50.0, split(1.0)) - 51f64.log2()).abs() < 1e-15);
        let r = rate_sic(100.0, split(0.24));
        assert!((r - 25f64.log2()).abs() < 1e-14);
        assert!((r - 4.6439).abs() < 5e-5);
    }

    #[test]
    fn oma_rate_values() {
        assert_eq!(rate_oma(0.0), 0.0);
        assert!((rate_oma(3.0) - 1.0).abs() < 1e-15);
        assert!((rate_oma(10.0) - 1.7297).abs() < 5e-5);
    }

    #[test]
    fn bound_at_full_error_budget() {
        let g = gain_lower_bound(4.0, 30.0, split(0.3), 1.0);
        assert!((g + rate_oma(4.0) + rate_oma(30.0)).abs() < 1e-15);
        assert!(g <= 0.0);
    }

    #[test]
    fn bound_composes_rate_functions() {
        for s in [0.5, 2.0, 10.0, 100.0] {
            let sp = split(0.5);
            let composed = rate_sic(s, sp) + rate_nonsic(s, sp) - 2.0 * rate_oma(s);
            assert!((gain_lower_bound(s, s, sp, 0.0) - composed).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_independent_recomputation() {
        // snr_k = 10, snr_n = 100, gamma_n = 0.3, p_t = 0.01
        let r_k = (1.0f64 + 10.0 * 0.7 / (10.0 * 0.3 + 1.0)).log2();
        let r_n = (1.0f64 + 100.0 * 0.3).log2();
        let expect = (r_k + r_n) * 0.99 - 0.5 * 101f64.log2() - 0.5 * 11f64.log2();
        assert!((gain_lower_bound(10.0, 100.0, split(0.3), 0.01) - expect).abs() < 1e-9);
    }

    #[test]
    fn report_equality_cases() {
        let sp = split(0.25);
        let zero = ErrorProbabilities { p_sic_as_nonsic: 0.0, p_nonsic_as_sic: 0.0 };
        let r = gain_report(3.0, 40.0, sp, zero, 0.0);
        assert!((r.delta_total - r.lower_bound).abs() < 1e-12);
        let at = ErrorProbabilities { p_sic_as_nonsic: 0.02, p_nonsic_as_sic: 0.02 };
        let r = gain_report(3.0, 40.0, sp, at, 0.02);
        assert!((r.delta_total - r.lower_bound).abs() < 1e-12);
        assert!((r.delta_n + r.delta_k - r.delta_total).abs() < 1e-15);
    }

    #[test]
    fn report_dominates_bound_below_budget() {
        let mut rng = substream(21, Stream::Trials, 0);
        for _ in 0..1000 {
            let p_t: f64 = rng.random_range(0.0..0.5);
            let errs = ErrorProbabilities {
                p_sic_as_nonsic: rng.random_range(0.0..=p_t),
                p_nonsic_as_sic: rng.random_range(0.0..=p_t),
            };
            let snr_k = 10f64.powf(rng.random_range(-1.0..2.0));
            let snr_n = snr_k * 10f64.powf(rng.random_range(0.0..2.0));
            let sp = split(rng.random_range(0.0..1.0));
            let r = gain_report(snr_k, snr_n, sp, errs, p_t);
            assert!(r.delta_total >= r.lower_bound - 1e-12);
        }
    }

    #[test]
    fn rates_monotone_in_gamma() {
        let mut rng = substream(23, Stream::Trials, 0);
        let h = 1e-6;
        for _ in 0..1000 {
            let g: f64 = rng.random_range(0.01..0.99);
            let snr_k = 10f64.powf(rng.random_range(-1.0..2.0));
            let snr_n = snr_k * 10f64.powf(rng.random_range(0.01..2.0));
            let p_t: f64 = rng.random_range(0.0..0.5);
            let (lo, hi) = (split(g - h), split(g + h));
            assert!(rate_sic(snr_n, hi) > rate_sic(snr_n, lo));
            assert!(rate_nonsic(snr_k, hi) < rate_nonsic(snr_k, lo));
            assert!(gain_lower_bound(snr_k, snr_n, hi, p_t) > gain_lower_bound(snr_k, snr_n, lo, p_t));
        }
    }

    #[test]
    fn rate_pair_min() {
        let r = RatePair::new(10.0, 100.0, split(0.24));
        assert_eq!(r.min(), r.r_nonsic);
        assert!(r.r_nonsic >= 0.0 && r.r_sic >= 0.0);
    }

    #[test]
    fn threshold_matches_derivative_sign() {
        let mut rng = substream(22, Stream::Trials, 0);
        for _ in 0..1000 {
            let gamma_n: f64 = rng.random_range(0.01..0.99);
            let p_t: f64 = rng.random_range(0.0..0.3);
            let snr_k = 10f64.powf(rng.random_range(-2.0..2.0));
            let snr_n = 1000.0;
            let sp = split(gamma_n);
            let step = 1e-6 * snr_k.max(1e-3);
            let slope = (gain_lower_bound(snr_k + step, snr_n, sp, p_t) - gain_lower_bound(snr_k - step, snr_n, sp, p_t)) / (2.0 * step);
            let margin = nonsic_snr_threshold(gamma_n, p_t) - snr_k;
            if margin.abs() > 1e-3 * snr_k.max(1.0) {
                assert_eq!(slope > 0.0, margin > 0.0, "gamma_n={gamma_n} p_t={p_t} snr_k={snr_k}");
            }
        }
    }
}
