//! Analytical blind-classification error probabilities.
//!
//! Both error types are evaluated under the dominant-term approximation: the
//! mixture likelihoods are replaced by their largest component, the SIC-user
//! error assumes the transmitted point maximizes both likelihoods, and the
//! non-SIC-user error assumes its own symbol is detected correctly and
//! weights each competing composite point by the probability that the
//! matched-filter output falls in that point's decision rectangle.
//!
//! The `quadrant_only` variants use the 90 degree rotational symmetry of
//! square QAM: rotating both user symbols by `j` leaves every term unchanged,
//! so summing over first-quadrant `s_k` with weight `4 / |chi|` is exact.

use std::f64::consts::SQRT_2;

use log::debug;
use num_complex::Complex64;

use crate::channel::LinkState;
use crate::constellation::{first_quadrant_indices, CompositeConstellation, ModulationPair};
use crate::error::{param, Result};
use crate::rates::PowerSplit;

/// Gaussian tail `P[N(0, 1) > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorProbabilities {
    /// SIC user decides it does not need SIC.
    pub p_sic_as_nonsic: f64,
    /// Non-SIC user decides it needs SIC.
    pub p_nonsic_as_sic: f64,
}

impl ErrorProbabilities {
    pub fn max(&self) -> f64 {
        self.p_sic_as_nonsic.max(self.p_nonsic_as_sic)
    }
}

/// Denominators below this make a pairwise test deterministic; such terms
/// are dropped.
const DEGENERATE_SCALE: f64 = 1e-12;

fn clamp_probability(p: f64, what: &str) -> f64 {
    let clamped = p.clamp(0.0, 1.0);
    if clamped != p {
        debug!("{what}: clamped {p:e} by {:e}", (p - clamped).abs());
    }
    clamped
}

/// Outer summation set for `s_k` and its weight.
fn outer_indices(chi: &CompositeConstellation, quadrant_only: bool) -> Result<(Vec<usize>, f64)> {
    let size = chi.len() as f64;
    if quadrant_only {
        first_quadrant_indices(chi.parent_n())?;
        Ok((first_quadrant_indices(chi.parent_k())?, 4.0 / size))
    } else {
        Ok(((0..chi.parent_k().len()).collect(), 1.0 / size))
    }
}

/// Probability that the SIC user prefers the non-SIC hypothesis.
///
/// Each transmitted pair `(i0, l0)` contributes the Gaussian tail of the
/// log-likelihood-ratio test between its own `s_k(i0)` term and its own
/// composite term.
pub fn p_err_sic_user(h: Complex64, noise_var: f64, chi: &CompositeConstellation, quadrant_only: bool) -> Result<f64> {
    if !(noise_var > 0.0) {
        return param(format!("noise variance {noise_var} must be positive"));
    }
    let h2 = h.norm_sqr();
    let ck = chi.parent_k().points();
    let cn = chi.parent_n().points();
    let ln_ratio = (ck.len() as f64 / chi.len() as f64).ln();
    let (outer, weight) = outer_indices(chi, quadrant_only)?;

    let mut total = 0.0;
    for &i0 in &outer {
        let sk = ck[i0];
        for &sn in cn {
            let s0 = sk + sn;
            let scale = (2.0 * noise_var * h2 * sn.norm_sqr()).sqrt();
            if scale < DEGENERATE_SCALE {
                continue;
            }
            let num = noise_var * ln_ratio - h2 * (s0.norm_sqr() - sk.norm_sqr()) + 2.0 * h2 * (s0 * sn.conj()).re;
            total += q_function(num / scale);
        }
    }
    Ok(clamp_probability(total * weight, "sic-user error"))
}

/// Probability that the matched-filter output of transmitted point `x0`
/// lands in the rectangle `[lo, hi)` along one axis, for per-axis noise
/// standard deviation `sd`.
fn interval_probability(lo: f64, hi: f64, x0: f64, sd: f64) -> f64 {
    q_function((lo - x0) / sd) - q_function((hi - x0) / sd)
}

/// Probability that the non-SIC user prefers the SIC hypothesis.
///
/// For transmitted `s(m0) = s_k(i0) + s_n(l0)` and every candidate `s_n(l)`,
/// the pairwise tail between `s_k(i0)` and `s_k(i0) + s_n(l)` is weighted by
/// the probability that `s_k(i0) + s_n(l)` is the detected composite point.
pub fn p_err_nonsic_user(h: Complex64, noise_var: f64, chi: &CompositeConstellation, quadrant_only: bool) -> Result<f64> {
    if !(noise_var > 0.0) {
        return param(format!("noise variance {noise_var} must be positive"));
    }
    let h2 = h.norm_sqr();
    if h2 == 0.0 {
        return param("zero channel gain");
    }
    let ck = chi.parent_k().points();
    let cn = chi.parent_n().points();
    let regions = chi.regions();
    let ln_ratio = (chi.len() as f64 / ck.len() as f64).ln();
    // Matched filter y / h: per-axis noise variance sigma^2 / (2 |h|^2).
    let axis_sd = (noise_var / h2 / 2.0).sqrt();
    let (outer, weight) = outer_indices(chi, quadrant_only)?;

    let mut total = 0.0;
    for &i0 in &outer {
        let sk = ck[i0];
        for &sn0 in cn {
            let s0 = sk + sn0;
            for (l, &sn) in cn.iter().enumerate() {
                let scale = (2.0 * noise_var * h2 * sn.norm_sqr()).sqrt();
                if scale < DEGENERATE_SCALE {
                    continue;
                }
                let num = noise_var * ln_ratio + h2 * ((sk + sn).norm_sqr() - sk.norm_sqr()) - 2.0 * h2 * (s0 * sn.conj()).re;
                let tail = q_function(num / scale);
                let r = &regions[chi.index(i0, l)];
                let region = interval_probability(r.re_lo, r.re_hi, s0.re, axis_sd)
                    * interval_probability(r.im_lo, r.im_hi, s0.im, axis_sd);
                total += tail * region;
            }
        }
    }
    Ok(clamp_probability(total * weight, "non-sic-user error"))
}

fn check_votes(p0: f64, samples: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&p0) {
        return param(format!("per-sample error {p0} outside [0, 1]"));
    }
    if samples == 0 || samples.is_multiple_of(2) {
        return param(format!("sample count {samples} must be odd"));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Probability that a majority of `samples` independent votes is wrong when
/// each vote is wrong with probability `p0`.
pub fn combine_majority(p0: f64, samples: usize) -> Result<f64> {
    check_votes(p0, samples)?;
    let n = samples;
    Ok((n.div_ceil(2)..=n)
        .map(|wrong| binomial(n, wrong) * p0.powi(wrong as i32) * (1.0 - p0).powi((n - wrong) as i32))
        .sum())
}

/// Binomial sum with correct-vote count running over `1..=(L + 1) / 2`, kept
/// only for comparison against [`combine_majority`].
pub fn combine_majority_literal(p0: f64, samples: usize) -> Result<f64> {
    check_votes(p0, samples)?;
    let n = samples;
    Ok((1..=n.div_ceil(2))
        .map(|right| binomial(n, right) * (1.0 - p0).powi(right as i32) * p0.powi((n - right) as i32))
        .sum())
}

/// Majority-combined SIC-user error on `link_n`.
pub fn sic_user_error(link_n: &LinkState, chi: &CompositeConstellation, samples: usize) -> Result<f64> {
    let p0 = p_err_sic_user(link_n.h, link_n.noise_var, chi, true)?;
    combine_majority(p0, samples)
}

/// Majority-combined non-SIC-user error on `link_k`.
pub fn nonsic_user_error(link_k: &LinkState, chi: &CompositeConstellation, samples: usize) -> Result<f64> {
    let p0 = p_err_nonsic_user(link_k.h, link_k.noise_var, chi, true)?;
    combine_majority(p0, samples)
}

/// Both error probabilities for a scheduled pair after `samples`-way
/// majority voting.
pub fn analytical_error_pair(
    link_k: &LinkState,
    link_n: &LinkState,
    split: PowerSplit,
    mods: ModulationPair,
    samples: usize,
) -> Result<ErrorProbabilities> {
    let chi = mods.composite(split.gamma_n())?;
    Ok(ErrorProbabilities {
        p_sic_as_nonsic: sic_user_error(link_n, &chi, samples)?,
        p_nonsic_as_sic: nonsic_user_error(link_k, &chi, samples)?,
    })
}
