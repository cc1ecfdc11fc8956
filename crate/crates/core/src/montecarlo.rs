//! Monte Carlo estimates and brute-force oracles.
//!
//! Every trial draws from its own substream keyed by the trial index, and
//! counts are integers, so estimates are bitwise identical for any thread
//! count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::analytical_error_pair;
use crate::channel::{complex_normal, LinkState, UserDrop};
use crate::classifier::{classify_multi, Hypothesis, Observation};
use crate::constellation::{CompositeConstellation, ModulationPair};
use crate::error::{param, NomaError, Result};
use crate::optimizer::{allocate, at_nondegenerate, PairingParams, PLUG_BACK_TOL};
use crate::rates::{gain_lower_bound, rate_nonsic, rate_sic, PowerSplit};
use crate::rng::{substream, Stream};
use crate::scheduler::SchedulingOutcome;

/// Largest user count [`exhaustive_schedule`] accepts.
pub const EXHAUSTIVE_MAX_USERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub trials: u64,
    pub seed: u64,
    pub mods: ModulationPair,
    pub split: PowerSplit,
    pub link_k: LinkState,
    pub link_n: LinkState,
    pub samples: usize,
}

/// Bernoulli mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl EstimateWithCI {
    pub fn from_count(hits: u64, trials: u64) -> Self {
        let mean = hits as f64 / trials as f64;
        Self { mean, std_error: (mean * (1.0 - mean) / trials as f64).sqrt(), trials }
    }
}

fn observe<R: Rng>(link: &LinkState, chi: &CompositeConstellation, samples: usize, rng: &mut R) -> Observation {
    let sd = link.noise_var.sqrt();
    let pts = chi.points();
    let samples = (0..samples)
        .map(|_| {
            let s: Complex64 = pts[rng.random_range(0..pts.len())];
            link.h * s + complex_normal(rng) * sd
        })
        .collect();
    Observation { samples, h: link.h, noise_var: link.noise_var }
}

/// Empirical `(P[SIC user decides non-SIC], P[non-SIC user decides SIC])`.
///
/// Each trial sends `L` uniformly drawn composite symbols to each user and
/// applies the majority-vote classifier.
pub fn estimate_error_pair(cfg: &TrialConfig) -> Result<(EstimateWithCI, EstimateWithCI)> {
    if cfg.trials == 0 {
        return param("trials must be at least 1");
    }
    if cfg.samples.is_multiple_of(2) {
        return param(format!("L = {} must be odd", cfg.samples));
    }
    let chi = cfg.mods.composite(cfg.split.gamma_n())?;
    let (miss_n, miss_k) = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(cfg.seed, Stream::Trials, t);
            let at_n = observe(&cfg.link_n, &chi, cfg.samples, &mut rng);
            let at_k = observe(&cfg.link_k, &chi, cfg.samples, &mut rng);
            let wrong_n = classify_multi(&at_n, &chi).expect("odd L") == Hypothesis::NonSic;
            let wrong_k = classify_multi(&at_k, &chi).expect("odd L") == Hypothesis::Sic;
            (wrong_n as u64, wrong_k as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((EstimateWithCI::from_count(miss_n, cfg.trials), EstimateWithCI::from_count(miss_k, cfg.trials)))
}

/// Empirical error of a majority vote over `L` independent votes, each
/// wrong with probability `p0`.
pub fn estimate_majority_error(p0: f64, samples: usize, trials: u64, seed: u64) -> Result<EstimateWithCI> {
    if !(0.0..=1.0).contains(&p0) || samples.is_multiple_of(2) || trials == 0 {
        return param(format!("invalid majority experiment p0={p0} L={samples} trials={trials}"));
    }
    let wrong = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, Stream::Trials, t);
            let errs = (0..samples).filter(|_| rng.random::<f64>() < p0).count();
            u64::from(2 * errs > samples)
        })
        .sum();
    Ok(EstimateWithCI::from_count(wrong, trials))
}

/// `gamma_n` on the grid `step, 2 step, ...` (below 1) that maximizes the
/// gain bound subject to both rate targets and both error budgets, all
/// evaluated analytically, with ties going to the larger `gamma_n`. `None`
/// if no grid point qualifies.
pub fn grid_optimal_gamma(link_k: &LinkState, link_n: &LinkState, params: &PairingParams, step: f64) -> Result<Option<f64>> {
    if !(step > 0.0 && step <= 0.1) {
        return param(format!("grid step {step} outside (0, 0.1]"));
    }
    params.validate()?;
    let (snr_k, snr_n) = (link_k.snr(), link_n.snr());
    let r_tt = params.r_t_tilde();
    let points = (1.0 / step).round() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 1..points {
        let gamma = i as f64 * step;
        let split = PowerSplit::from_gamma_n(gamma)?;
        if rate_nonsic(snr_k, split) < r_tt - PLUG_BACK_TOL || rate_sic(snr_n, split) < r_tt - PLUG_BACK_TOL {
            continue;
        }
        let errs = at_nondegenerate(gamma, |g| analytical_error_pair(link_k, link_n, PowerSplit::from_gamma_n(g)?, params.mods, params.samples))?;
        if errs.max() > params.p_t + PLUG_BACK_TOL {
            continue;
        }
        let gain = gain_lower_bound(snr_k, snr_n, split, params.p_t);
        // Ties go to the larger split, which is never worse for the gain bound.
        if best.is_none_or(|(_, g)| gain >= g) {
            best = Some((gamma, gain));
        }
    }
    Ok(best.map(|(gamma, _)| gamma))
}

/// How [`exhaustive_schedule`] picks the split for each candidate partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerSearch {
    /// The optimizer's closed-form and bisection solution.
    Theorem,
    /// [`grid_optimal_gamma`] with the given step.
    Grid(f64),
}

/// Best partner for rank 1 over every rank `2..=K`.
pub fn exhaustive_schedule(drop: &UserDrop, params: &PairingParams, search: PowerSearch) -> Result<SchedulingOutcome> {
    if drop.len() > EXHAUSTIVE_MAX_USERS {
        return Err(NomaError::CostGuard { users: drop.len(), limit: EXHAUSTIVE_MAX_USERS });
    }
    if drop.len() < 2 {
        return param(format!("need at least 2 users, got {}", drop.len()));
    }
    let link_n = drop.user(1);
    let mut best = SchedulingOutcome::infeasible();
    for k in 2..=drop.len() {
        let link_k = drop.user(k);
        if !(link_n.snr() > link_k.snr()) {
            continue;
        }
        let found = match search {
            PowerSearch::Theorem => {
                let a = allocate(link_k, link_n, params)?;
                a.split.map(|s| (s, a.lower_bound_gain))
            }
            PowerSearch::Grid(step) => match grid_optimal_gamma(link_k, link_n, params, step)? {
                Some(g) => {
                    let s = PowerSplit::from_gamma_n(g)?;
                    Some((s, gain_lower_bound(link_k.snr(), link_n.snr(), s, params.p_t)))
                }
                None => None,
            },
        };
        if let Some((split, gain)) = found {
            if !best.feasible || gain > best.lower_bound_gain {
                best = SchedulingOutcome {
                    sic_user: 1,
                    nonsic_user: k,
                    split: Some(split),
                    lower_bound_gain: gain,
                    feasible: true,
                    iterations: 0,
                    case_trace: Vec::new(),
                };
            }
        }
    }
    Ok(best)
}
