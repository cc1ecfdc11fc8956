//! Power allocation for a fixed pair `(k, n)` with `snr_n > snr_k`.
//!
//! Both upper constraints cap `gamma_n` from above: the non-SIC user's rate
//! falls with `gamma_n` and its classification error rises with it. The
//! lower bound of the sum-rate gain increases in `gamma_n`, so the optimum
//! sits at the smaller of the two caps. The SIC user's own constraints are
//! checked by plugging the optimum back in.

use log::debug;
use serde::Serialize;

use crate::analysis::{analytical_error_pair, nonsic_user_error, ErrorProbabilities};
use crate::channel::LinkState;
use crate::constellation::ModulationPair;
use crate::error::{param, NomaError, Result};
use crate::rates::{gain_lower_bound, rate_nonsic, rate_sic, PowerSplit};

/// Innermost `gamma_n` probed at either end of `[0, 1]`.
pub const GAMMA_EDGE: f64 = 1e-6;
/// Step used to move off splits where composite points coincide.
const DEGENERACY_NUDGE: f64 = 1e-7;
/// Grid intervals in the scan that brackets the first classifier violation.
const COARSE_POINTS: usize = 50;
/// Slack allowed in the plug-back checks.
pub const PLUG_BACK_TOL: f64 = 1e-9;

/// Everything fixed while allocating power to one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingParams {
    pub mods: ModulationPair,
    /// Observation count `L` used by the majority-vote classifier.
    pub samples: usize,
    pub r_t: f64,
    pub p_t: f64,
    pub eps: f64,
}

impl PairingParams {
    pub fn new(mods: ModulationPair, samples: usize, r_t: f64, p_t: f64) -> Self {
        Self { mods, samples, r_t, p_t, eps: 1e-4 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_multiple_of(2) {
            return param(format!("L = {} must be odd", self.samples));
        }
        if !(0.0..=1.0).contains(&self.p_t) {
            return param(format!("p_t = {} outside [0, 1]", self.p_t));
        }
        if !(self.r_t >= 0.0) {
            return param(format!("r_t = {} must be nonnegative", self.r_t));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return param(format!("eps = {} outside (0, 0.5)", self.eps));
        }
        Ok(())
    }

    /// Rate target inflated by the classification-error budget.
    pub fn r_t_tilde(&self) -> f64 {
        if self.r_t == 0.0 {
            0.0
        } else {
            self.r_t / (1.0 - self.p_t)
        }
    }
}

/// A cap on `gamma_n`. `feasible = false` means no positive `gamma_n`
/// satisfies the constraint and `gamma` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Boundary {
    pub gamma: f64,
    pub feasible: bool,
    /// The bisection saw a non-monotone error curve and a grid scan was used.
    pub fallback_scan: bool,
}

impl Boundary {
    fn infeasible() -> Self {
        Self { gamma: 0.0, feasible: false, fallback_scan: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Binding {
    RateConstraint,
    ClassifierConstraint,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AllocationResult {
    /// `None` when the pair admits no split.
    pub split: Option<PowerSplit>,
    pub gamma_r: f64,
    pub gamma_p: f64,
    pub binding: Binding,
    /// Lower bound of the sum-rate gain at `split`; 0 when infeasible.
    pub lower_bound_gain: f64,
    /// Analytical error probabilities at `split`.
    pub errors: Option<ErrorProbabilities>,
    pub fallback_scan: bool,
}

impl AllocationResult {
    pub fn is_feasible(&self) -> bool {
        self.split.is_some()
    }

    pub fn gamma_n(&self) -> Option<f64> {
        self.split.map(|s| s.gamma_n())
    }

    fn infeasible(gamma_r: f64, gamma_p: f64, fallback_scan: bool) -> Self {
        Self {
            split: None,
            gamma_r,
            gamma_p,
            binding: Binding::Infeasible,
            lower_bound_gain: 0.0,
            errors: None,
            fallback_scan,
        }
    }
}

/// Largest `gamma_n` at which the non-SIC user still reaches `r_t_tilde`.
pub fn gamma_rate_boundary(snr_k: f64, r_t_tilde: f64) -> Result<Boundary> {
    if !(snr_k > 0.0) {
        return param(format!("snr_k = {snr_k} must be positive"));
    }
    let c = r_t_tilde.exp2();
    if snr_k < c - 1.0 {
        return Ok(Boundary::infeasible());
    }
    let gamma = ((snr_k - (c - 1.0)) / (c * snr_k)).clamp(0.0, 1.0);
    Ok(Boundary { gamma, feasible: true, fallback_scan: false })
}

/// Runs `f` at `gamma`, stepping off splits that make composite points
/// coincide.
pub(crate) fn at_nondegenerate<T>(gamma: f64, mut f: impl FnMut(f64) -> Result<T>) -> Result<T> {
    let mut last = None;
    for g in [gamma, gamma - DEGENERACY_NUDGE, gamma + DEGENERACY_NUDGE, gamma - 10.0 * DEGENERACY_NUDGE] {
        match f(g.clamp(0.0, 1.0)) {
            Err(e @ NomaError::DegenerateConstellation { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

pub(crate) fn nonsic_error_at(link_k: &LinkState, mods: ModulationPair, samples: usize, gamma: f64) -> Result<f64> {
    at_nondegenerate(gamma, |g| nonsic_user_error(link_k, &mods.composite(g)?, samples))
}

/// Largest `gamma_n` (to within `eps`) such that the non-SIC user's majority
/// classification error stays at or below `p_t` on all of `[0, gamma_n]`.
///
/// The error is not monotone over the whole unit interval, so a coarse scan
/// first locates the first violation; bisection inside that bracket moves
/// the lower end up whenever the constraint holds. The error values seen
/// below the final bracket must be nondecreasing; if not, the bracket is
/// rescanned with step `eps`.
pub fn gamma_classifier_boundary(link_k: &LinkState, mods: ModulationPair, samples: usize, p_t: f64, eps: f64) -> Result<Boundary> {
    if !(0.0..=1.0).contains(&p_t) {
        return param(format!("p_t = {p_t} outside [0, 1]"));
    }
    if !(eps > 0.0) {
        return param(format!("eps = {eps} must be positive"));
    }
    let eval = |g: f64| nonsic_error_at(link_k, mods, samples, g);
    let coarse = |i: usize| GAMMA_EDGE + (1.0 - 2.0 * GAMMA_EDGE) * i as f64 / COARSE_POINTS as f64;
    let mut seen = Vec::with_capacity(COARSE_POINTS + 64);
    let mut crossing = None;
    for i in 0..=COARSE_POINTS {
        let g = coarse(i);
        let p = eval(g)?;
        seen.push((g, p));
        if p > p_t {
            crossing = Some(i);
            break;
        }
    }
    let (mut lo, mut hi) = match crossing {
        None => return Ok(Boundary { gamma: 1.0, feasible: true, fallback_scan: false }),
        Some(0) => return Ok(Boundary::infeasible()),
        Some(i) => (coarse(i - 1), coarse(i)),
    };
    let bracket_lo = lo;
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid)?;
        seen.push((mid, p));
        if p <= p_t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    seen.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = seen
        .iter()
        .take_while(|(g, _)| *g <= hi)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12));
    if monotone {
        return Ok(Boundary { gamma: lo, feasible: true, fallback_scan: false });
    }
    debug!("non-monotone classification error below gamma_n = {hi}; rescanning with step {eps}");
    let mut gamma = bracket_lo;
    let mut g = bracket_lo + eps;
    while g < hi + eps {
        if eval(g)? > p_t {
            break;
        }
        gamma = g;
        g += eps;
    }
    Ok(Boundary { gamma, feasible: true, fallback_scan: true })
}

/// Optimal power split for the pair: `gamma_n = min(gamma_r, gamma_p)`,
/// accepted only if every rate and error constraint holds there.
pub fn allocate(link_k: &LinkState, link_n: &LinkState, params: &PairingParams) -> Result<AllocationResult> {
    params.validate()?;
    let (snr_k, snr_n) = (link_k.snr(), link_n.snr());
    if !(snr_n > snr_k) {
        return param(format!("SIC user SNR {snr_n} must exceed non-SIC user SNR {snr_k}"));
    }
    let r_tt = params.r_t_tilde();
    let rate = gamma_rate_boundary(snr_k, r_tt)?;
    if !rate.feasible {
        return Ok(AllocationResult::infeasible(rate.gamma, 0.0, false));
    }
    let class = gamma_classifier_boundary(link_k, params.mods, params.samples, params.p_t, params.eps)?;
    if !class.feasible {
        return Ok(AllocationResult::infeasible(rate.gamma, class.gamma, class.fallback_scan));
    }
    let gamma = rate.gamma.min(class.gamma).min(1.0 - GAMMA_EDGE);
    if gamma < GAMMA_EDGE {
        return Ok(AllocationResult::infeasible(rate.gamma, class.gamma, class.fallback_scan));
    }
    let binding = if rate.gamma <= class.gamma { Binding::RateConstraint } else { Binding::ClassifierConstraint };
    // Only nudge downward here: both caps stay satisfied below gamma.
    let (split, errors) = {
        let mut found = None;
        for g in [gamma, gamma - DEGENERACY_NUDGE, gamma - 10.0 * DEGENERACY_NUDGE] {
            let split = PowerSplit::from_gamma_n(g)?;
            match analytical_error_pair(link_k, link_n, split, params.mods, params.samples) {
                Ok(e) => {
                    found = Some((split, e));
                    break;
                }
                Err(NomaError::DegenerateConstellation { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        match found {
            Some(f) => f,
            None => return Ok(AllocationResult::infeasible(rate.gamma, class.gamma, class.fallback_scan)),
        }
    };
    let rates_ok = rate_nonsic(snr_k, split) >= r_tt - PLUG_BACK_TOL && rate_sic(snr_n, split) >= r_tt - PLUG_BACK_TOL;
    let errors_ok = errors.max() <= params.p_t + PLUG_BACK_TOL;
    if !(rates_ok && errors_ok) {
        return Ok(AllocationResult::infeasible(rate.gamma, class.gamma, class.fallback_scan));
    }
    Ok(AllocationResult {
        split: Some(split),
        gamma_r: rate.gamma,
        gamma_p: class.gamma,
        binding,
        lower_bound_gain: gain_lower_bound(snr_k, snr_n, split, params.p_t),
        errors: Some(errors),
        fallback_scan: class.fallback_scan,
    })
}
