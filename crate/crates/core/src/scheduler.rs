//! Joint choice of the non-SIC partner and power split for the strongest
//! user, plus the two fixed-rule baselines.
//!
//! Users are ranked by descending channel gain, 1-based. The SIC user is
//! always rank 1. Moving to rank `k - 1` means a stronger partner, `k + 1` a
//! weaker one.

use serde::Serialize;

use crate::channel::UserDrop;
use crate::error::{param, Result};
use crate::optimizer::{allocate, AllocationResult, Binding, PairingParams};
use crate::rates::{nonsic_snr_threshold, PowerSplit};

/// One move of the proposed walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CaseStep {
    pub case: u8,
    pub from_k: usize,
    pub to_k: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulingOutcome {
    pub sic_user: usize,
    /// 0 when no partner is feasible.
    pub nonsic_user: usize,
    pub split: Option<PowerSplit>,
    pub lower_bound_gain: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub case_trace: Vec<CaseStep>,
}

impl SchedulingOutcome {
    /// Everyone stays on OMA.
    pub fn infeasible() -> Self {
        Self {
            sic_user: 1,
            nonsic_user: 0,
            split: None,
            lower_bound_gain: 0.0,
            feasible: false,
            iterations: 0,
            case_trace: Vec::new(),
        }
    }

    fn paired(k: usize, alloc: &AllocationResult) -> Self {
        Self {
            sic_user: 1,
            nonsic_user: k,
            split: alloc.split,
            lower_bound_gain: alloc.lower_bound_gain,
            feasible: true,
            iterations: 0,
            case_trace: Vec::new(),
        }
    }
}

/// Case 1 to 4 from the binding constraint and the sign of the gain bound's
/// slope in the partner's SNR, evaluated at the allocated split.
pub fn classify_case(alloc: &AllocationResult, snr_k: f64, p_t: f64) -> Result<u8> {
    let Some(split) = alloc.split else {
        return param("cannot classify an infeasible allocation");
    };
    let rising = nonsic_snr_threshold(split.gamma_n(), p_t) >= snr_k;
    Ok(match (alloc.binding, rising) {
        (Binding::RateConstraint, true) => 1,
        (Binding::RateConstraint, false) => 2,
        (Binding::ClassifierConstraint, false) => 3,
        (Binding::ClassifierConstraint, true) => 4,
        (Binding::Infeasible, _) => return param("cannot classify an infeasible allocation"),
    })
}

/// Lazily allocates power for each candidate partner of rank 1.
pub struct PairEvaluator<'a> {
    drop: &'a UserDrop,
    params: PairingParams,
    cache: Vec<Option<AllocationResult>>,
}

impl<'a> PairEvaluator<'a> {
    pub fn new(drop: &'a UserDrop, params: PairingParams) -> Result<Self> {
        if drop.len() < 2 {
            return param(format!("need at least 2 users, got {}", drop.len()));
        }
        params.validate()?;
        Ok(Self { drop, params, cache: vec![None; drop.len() + 1] })
    }

    pub fn users(&self) -> usize {
        self.drop.len()
    }

    pub fn snr(&self, rank: usize) -> f64 {
        self.drop.user(rank).snr()
    }

    /// Allocation for the pair `(k, 1)`; ties in SNR count as infeasible.
    pub fn evaluate(&mut self, k: usize) -> Result<AllocationResult> {
        if !(2..=self.drop.len()).contains(&k) {
            return param(format!("partner rank {k} outside 2..={}", self.drop.len()));
        }
        if let Some(a) = self.cache[k] {
            return Ok(a);
        }
        let (link_k, link_n) = (self.drop.user(k), self.drop.user(1));
        let a = if link_n.snr() > link_k.snr() {
            allocate(link_k, link_n, &self.params)?
        } else {
            infeasible_allocation()
        };
        self.cache[k] = Some(a);
        Ok(a)
    }

    /// Ranks whose pairing with rank 1 admits a split.
    pub fn feasible_set(&mut self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for k in 2..=self.drop.len() {
            if self.evaluate(k)?.is_feasible() {
                out.push(k);
            }
        }
        Ok(out)
    }
}

fn infeasible_allocation() -> AllocationResult {
    AllocationResult {
        split: None,
        gamma_r: 0.0,
        gamma_p: 0.0,
        binding: Binding::Infeasible,
        lower_bound_gain: 0.0,
        errors: None,
        fallback_scan: false,
    }
}

/// Feasible rank nearest to `start`, preferring the stronger one on ties.
fn nearest_feasible(eval: &mut PairEvaluator, start: usize) -> Result<Option<usize>> {
    let users = eval.users();
    for offset in 0..users {
        for k in [start.checked_sub(offset), Some(start + offset)].into_iter().flatten() {
            if (2..=users).contains(&k) && eval.evaluate(k)?.is_feasible() {
                return Ok(Some(k));
            }
        }
    }
    Ok(None)
}

/// Case-directed local search over the partner rank.
///
/// Cases 1 and 2 move to a stronger partner, Cases 3 and 4 to a weaker one.
/// Cases 1 and 3 accept the move outright when the new split gives the SIC
/// user at least as much power; every other move is kept only if the gain
/// bound strictly improves. Infeasible ranks are stepped over. The walk ends
/// at the list boundary, at a rank already visited, or at the first
/// rejection, and the best pair visited is returned.
pub fn schedule_proposed(drop: &UserDrop, params: &PairingParams, start_k: Option<usize>) -> Result<SchedulingOutcome> {
    schedule_proposed_with(&mut PairEvaluator::new(drop, *params)?, start_k)
}

/// [`schedule_proposed`] reusing the allocations cached in `eval`.
pub fn schedule_proposed_with(eval: &mut PairEvaluator, start_k: Option<usize>) -> Result<SchedulingOutcome> {
    let p_t = eval.params.p_t;
    let users = eval.users();
    let start = start_k.unwrap_or(users.div_ceil(2).max(2));
    if !(2..=users).contains(&start) {
        return param(format!("start rank {start} outside 2..={users}"));
    }
    let Some(mut k) = nearest_feasible(eval, start)? else {
        return Ok(SchedulingOutcome::infeasible());
    };
    let mut visited = vec![false; users + 1];
    visited[k] = true;
    let mut best = k;
    let mut trace = Vec::new();
    loop {
        let here = eval.evaluate(k)?;
        let case = classify_case(&here, eval.snr(k), p_t)?;
        let stronger = case <= 2;
        let mut next = None;
        let mut cand = k;
        loop {
            cand = if stronger { cand - 1 } else { cand + 1 };
            if !(2..=users).contains(&cand) {
                break;
            }
            if eval.evaluate(cand)?.is_feasible() {
                next = Some(cand);
                break;
            }
        }
        let Some(cand) = next else { break };
        if visited[cand] {
            break;
        }
        visited[cand] = true;
        let there = eval.evaluate(cand)?;
        let gamma_up = there.gamma_n() >= here.gamma_n();
        let accepted = ((case == 1 || case == 3) && gamma_up) || there.lower_bound_gain > here.lower_bound_gain;
        trace.push(CaseStep { case, from_k: k, to_k: cand, accepted });
        if !accepted {
            break;
        }
        k = cand;
        if there.lower_bound_gain > eval.evaluate(best)?.lower_bound_gain {
            best = k;
        }
    }
    let mut out = SchedulingOutcome::paired(best, &eval.evaluate(best)?);
    out.iterations = trace.iter().filter(|s| s.accepted).count();
    out.case_trace = trace;
    Ok(out)
}

/// Strongest or weakest member of the feasible partner set, from the
/// allocations cached in `eval`.
pub fn schedule_by_rule_with(eval: &mut PairEvaluator, pick_weakest: bool) -> Result<SchedulingOutcome> {
    let set = eval.feasible_set()?;
    let chosen = if pick_weakest { set.last() } else { set.first() };
    match chosen {
        Some(&k) => Ok(SchedulingOutcome::paired(k, &eval.evaluate(k)?)),
        None => Ok(SchedulingOutcome::infeasible()),
    }
}

/// Pairs rank 1 with the strongest feasible partner.
pub fn schedule_strongest_strongest(drop: &UserDrop, params: &PairingParams) -> Result<SchedulingOutcome> {
    schedule_by_rule_with(&mut PairEvaluator::new(drop, *params)?, false)
}

/// Pairs rank 1 with the weakest feasible partner.
pub fn schedule_strongest_weakest(drop: &UserDrop, params: &PairingParams) -> Result<SchedulingOutcome> {
    schedule_by_rule_with(&mut PairEvaluator::new(drop, *params)?, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkState;
    use crate::constellation::ModulationPair;
    use crate::rates::PowerSplit;

    fn params() -> PairingParams {
        PairingParams::new(ModulationPair::new(4, 16), 5, 0.8, 0.01)
    }

    fn drop_db(snrs_db: &[f64]) -> UserDrop {
        let links = snrs_db.iter().map(|&s| LinkState::from_snr(10f64.powf(s / 10.0)).unwrap()).collect();
        UserDrop::from_links(links, 0).unwrap()
    }

    fn feasible_alloc(binding: Binding, gamma_n: f64) -> AllocationResult {
        AllocationResult {
            split: Some(PowerSplit::from_gamma_n(gamma_n).unwrap()),
            binding,
            lower_bound_gain: 1.0,
            ..infeasible_allocation()
        }
    }

    #[test]
    fn case_table() {
        // Threshold at gamma_n = 0.2, p_t = 0.01: (1 - 0.4 - 0.02 + 0.004) / 0.2 = 2.92.
        let rate = feasible_alloc(Binding::RateConstraint, 0.2);
        let class = feasible_alloc(Binding::ClassifierConstraint, 0.2);
        assert_eq!(classify_case(&rate, 2.0, 0.01).unwrap(), 1);
        assert_eq!(classify_case(&rate, 3.0, 0.01).unwrap(), 2);
        assert_eq!(classify_case(&class, 3.0, 0.01).unwrap(), 3);
        assert_eq!(classify_case(&class, 2.0, 0.01).unwrap(), 4);
        assert!(classify_case(&infeasible_allocation(), 2.0, 0.01).is_err());
    }

    #[test]
    fn two_users_pair_up() {
        let d = drop_db(&[25.0, 8.0]);
        let out = schedule_proposed(&d, &params(), None).unwrap();
        let alloc = allocate(d.user(2), d.user(1), &params()).unwrap();
        assert!(alloc.is_feasible());
        assert_eq!((out.sic_user, out.nonsic_user), (1, 2));
        assert_eq!(out.split, alloc.split);
        assert!((out.lower_bound_gain - alloc.lower_bound_gain).abs() < 1e-9);
    }

    #[test]
    fn nothing_feasible_falls_back_to_oma() {
        let d = drop_db(&[-5.0, -8.0, -10.0]);
        for out in [
            schedule_proposed(&d, &params(), None).unwrap(),
            schedule_strongest_strongest(&d, &params()).unwrap(),
            schedule_strongest_weakest(&d, &params()).unwrap(),
        ] {
            assert!(!out.feasible);
            assert_eq!(out.lower_bound_gain, 0.0);
        }
    }

    #[test]
    fn baselines_pick_ends_of_feasible_set() {
        let d = drop_db(&[30.0, 14.0, 10.0, 7.0, 5.0, -6.0]);
        let mut eval = PairEvaluator::new(&d, params()).unwrap();
        let set = eval.feasible_set().unwrap();
        assert!(set.len() >= 2, "{set:?}");
        assert!(!set.contains(&6));
        assert_eq!(schedule_strongest_strongest(&d, &params()).unwrap().nonsic_user, set[0]);
        assert_eq!(schedule_strongest_weakest(&d, &params()).unwrap().nonsic_user, *set.last().unwrap());
    }

    #[test]
    fn three_users_match_exhaustive() {
        for snrs in [[30.0, 12.0, 6.0], [30.0, 6.0, 3.0], [25.0, 20.0, 4.0], [40.0, 9.0, 8.0]] {
            let d = drop_db(&snrs);
            let out = schedule_proposed(&d, &params(), None).unwrap();
            let best = (2..=3)
                .map(|k| allocate(d.user(k), d.user(1), &params()).unwrap())
                .filter(|a| a.is_feasible())
                .map(|a| a.lower_bound_gain)
                .fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                assert!((out.lower_bound_gain - best).abs() < 1e-9, "{snrs:?}");
            } else {
                assert!(!out.feasible);
            }
        }
    }

    #[test]
    fn walk_terminates_within_user_count() {
        let d = drop_db(&[35.0, 20.0, 15.0, 12.0, 10.0, 8.0, 6.0, 5.0, 3.0, 1.0]);
        for start in 2..=10 {
            let out = schedule_proposed(&d, &params(), Some(start)).unwrap();
            assert!(out.iterations <= d.len());
            assert_eq!(out.sic_user, 1);
        }
        assert!(schedule_proposed(&d, &params(), Some(1)).is_err());
        assert!(schedule_proposed(&d, &params(), Some(11)).is_err());
    }
}
