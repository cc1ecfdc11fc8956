//! Maximum-likelihood blind classification of whether a received signal
//! needs SIC.
//!
//! The SIC hypothesis scans the composite constellation, the non-SIC
//! hypothesis only the non-SIC user's own constellation. Every likelihood is
//! evaluated in the log domain so small noise variances do not underflow.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::constellation::{CompositeConstellation, Constellation};
use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// The receiver is the SIC user and must cancel interference.
    Sic,
    /// The receiver decodes its own symbol directly.
    NonSic,
}

/// `L` received samples sharing one channel coefficient.
#[derive(Debug, Clone)]
pub struct Observation {
    pub samples: Vec<Complex64>,
    pub h: Complex64,
    pub noise_var: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log density of `y` under a uniform mixture of `CN(h s, noise_var)` over
/// `points`.
pub fn log_mixture_density(y: Complex64, h: Complex64, noise_var: f64, points: &[Complex64]) -> f64 {
    let exponents = points.iter().map(move |&s| -(y - h * s).norm_sqr() / noise_var);
    log_sum_exp(exponents) - (points.len() as f64).ln() - (PI * noise_var).ln()
}

pub fn log_likelihood_sic(y: Complex64, h: Complex64, noise_var: f64, chi: &CompositeConstellation) -> f64 {
    log_mixture_density(y, h, noise_var, chi.points())
}

pub fn log_likelihood_nonsic(y: Complex64, h: Complex64, noise_var: f64, chi_k: &Constellation) -> f64 {
    log_mixture_density(y, h, noise_var, chi_k.points())
}

/// `p(y | SIC)`, averaged over the composite constellation.
pub fn likelihood_sic(y: Complex64, h: Complex64, noise_var: f64, chi: &CompositeConstellation) -> f64 {
    log_likelihood_sic(y, h, noise_var, chi).exp()
}

/// `p(y | non-SIC)`, averaged over the non-SIC user's constellation.
pub fn likelihood_nonsic(y: Complex64, h: Complex64, noise_var: f64, chi_k: &Constellation) -> f64 {
    log_likelihood_nonsic(y, h, noise_var, chi_k).exp()
}

/// SIC iff the SIC likelihood is strictly larger; ties go to non-SIC.
pub fn classify_single(y: Complex64, h: Complex64, noise_var: f64, chi: &CompositeConstellation) -> Hypothesis {
    let sic = log_likelihood_sic(y, h, noise_var, chi);
    let nonsic = log_likelihood_nonsic(y, h, noise_var, chi.parent_k());
    if sic > nonsic {
        Hypothesis::Sic
    } else {
        Hypothesis::NonSic
    }
}

/// Per-sample decisions reduced by majority vote. `L` must be odd.
pub fn classify_multi(obs: &Observation, chi: &CompositeConstellation) -> Result<Hypothesis> {
    let l = obs.samples.len();
    if l == 0 || l.is_multiple_of(2) {
        return param(format!("sample count {l} must be odd"));
    }
    let sic_votes = obs
        .samples
        .iter()
        .filter(|&&y| classify_single(y, obs.h, obs.noise_var, chi) == Hypothesis::Sic)
        .count();
    Ok(if 2 * sic_votes > l { Hypothesis::Sic } else { Hypothesis::NonSic })
}

/// Point sets for the `M`-user hypotheses: entry `m - 1` is the sum set
/// `chi_m + chi_{m+1} + ... + chi_M` that user `m` scans. `constellations`
/// is ordered from user 1 (strongest channel, smallest power) to user `M`.
pub fn hypothesis_point_sets(constellations: &[Constellation]) -> Vec<Vec<Complex64>> {
    let mut sets: Vec<Vec<Complex64>> = Vec::with_capacity(constellations.len());
    let mut tail: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    for c in constellations.iter().rev() {
        tail = c.points().iter().flat_map(|&s| tail.iter().map(move |&t| s + t)).collect();
        sets.push(tail.clone());
    }
    sets.reverse();
    sets
}

/// 1-based index of the most likely user hypothesis; ties go to the
/// smallest index.
pub fn classify_m_user(y: Complex64, h: Complex64, noise_var: f64, hypothesis_sets: &[Vec<Complex64>]) -> Result<usize> {
    if hypothesis_sets.is_empty() {
        return param("no hypotheses");
    }
    let mut best = (1, f64::NEG_INFINITY);
    for (m, set) in hypothesis_sets.iter().enumerate() {
        let ll = log_mixture_density(y, h, noise_var, set);
        if ll > best.1 {
            best = (m + 1, ll);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use crate::constellation::{make_qam, superpose};
    use crate::rng::{substream, Stream};
    use rand::Rng;

    fn direct_density(y: Complex64, h: Complex64, nv: f64, pts: &[Complex64]) -> f64 {
        pts.iter().map(|&s| (-(y - h * s).norm_sqr() / nv).exp() / (PI * nv)).sum::<f64>() / pts.len() as f64
    }

    fn qpsk_16qam(gamma_n: f64) -> CompositeConstellation {
        superpose(&make_qam(4, 1.0 - gamma_n).unwrap(), &make_qam(16, gamma_n).unwrap()).unwrap()
    }

    #[test]
    fn sic_likelihood_at_origin() {
        let chi = superpose(&make_qam(4, 0.75).unwrap(), &make_qam(4, 0.25).unwrap()).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let expect: f64 = chi.points().iter().map(|s| (-s.norm_sqr()).exp() / PI).sum::<f64>() / 16.0;
        let got = likelihood_sic(Complex64::new(0.0, 0.0), one, 1.0, &chi);
        assert!((got - expect).abs() < 1e-14 * expect.max(1.0));
    }

    #[test]
    fn nonsic_likelihood_four_terms() {
        let ck = make_qam(4, 0.76).unwrap();
        let y = Complex64::new(0.3, 0.1);
        let a = 0.38f64.sqrt();
        let mut expect = 0.0;
        for (sr, si) in [(a, a), (a, -a), (-a, a), (-a, -a)] {
            let d2 = (0.3 - sr) * (0.3 - sr) + (0.1 - si) * (0.1 - si);
            expect += (-d2 / 0.5).exp() / (PI * 0.5);
        }
        expect /= 4.0;
        let got = likelihood_nonsic(y, Complex64::new(1.0, 0.0), 0.5, &ck);
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn single_point_is_gaussian_density() {
        let s = Complex64::new(0.4, -0.2);
        let c = Constellation::from_points(vec![s]).unwrap();
        let y = Complex64::new(0.1, 0.3);
        let h = Complex64::new(0.8, 0.6);
        let expect = (-(y - h * s).norm_sqr() / 0.3).exp() / (PI * 0.3);
        assert!((likelihood_nonsic(y, h, 0.3, &c) - expect).abs() < 1e-13);
    }

    #[test]
    fn peak_dominance_at_small_noise() {
        let chi = qpsk_16qam(0.24);
        let h = Complex64::new(1.0, 0.0);
        let s = chi.points()[17];
        let nv = 1e-4;
        let single = -(PI * nv).ln() - (chi.len() as f64).ln();
        let ll = log_likelihood_sic(h * s, h, nv, &chi);
        assert!((ll - single).abs() < 1e-9);
    }

    #[test]
    fn nonsic_likelihood_peaks_on_own_points() {
        let ck = make_qam(4, 0.76).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let nv = 1e-3;
        let at_point = likelihood_nonsic(ck.points()[0], h, nv, &ck);
        let mut rng = substream(1, Stream::Trials, 0);
        for _ in 0..1000 {
            let y = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert!(likelihood_nonsic(y, h, nv, &ck) <= at_point * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rotation_invariance() {
        let chi = qpsk_16qam(0.24);
        let rot = Complex64::from_polar(1.0, 0.7);
        let y = Complex64::new(0.2, -0.9);
        let h = Complex64::new(0.9, 0.3);
        let a = log_likelihood_sic(y, h, 0.2, &chi);
        let b = log_likelihood_sic(y * rot, h * rot, 0.2, &chi);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn log_domain_matches_direct_sum() {
        let chi = qpsk_16qam(0.24);
        let mut rng = substream(2, Stream::Trials, 0);
        for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0] {
            let nv = 10f64.powf(-snr_db / 10.0);
            for _ in 0..200 {
                let h = complex_normal(&mut rng);
                let s = chi.points()[rng.random_range(0..chi.len())];
                let y = h * s + complex_normal(&mut rng) * nv.sqrt();
                for pts in [chi.points(), chi.parent_k().points()] {
                    let direct = direct_density(y, h, nv, pts);
                    if direct > 1e-300 {
                        let via_log = log_mixture_density(y, h, nv, pts).exp();
                        assert!((via_log - direct).abs() <= 1e-9 * direct, "{via_log} vs {direct}");
                    }
                }
                assert!(log_likelihood_sic(y, h, nv, &chi).is_finite());
            }
        }
    }

    #[test]
    fn noiseless_composite_point_is_sic() {
        let chi = qpsk_16qam(0.24);
        let h = Complex64::new(1.0, 0.0);
        let cn = chi.parent_n();
        let (l, _) = cn
            .points()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .unwrap();
        let y = chi.points()[chi.index(0, l)];
        assert_eq!(classify_single(y, h, 1e-3, &chi), Hypothesis::Sic);
    }

    #[test]
    fn exact_tie_goes_to_nonsic() {
        // A zero-power SIC constellation makes the composite equal to the
        // non-SIC set, so both likelihoods coincide for every y.
        let ck = Constellation::from_points(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap();
        let cn = Constellation::from_points(vec![Complex64::new(0.0, 0.0)]).unwrap();
        let chi = superpose(&ck, &cn).unwrap();
        let h = Complex64::new(1.0, 0.0);
        for y in [ck.points()[0], ck.points()[1], Complex64::new(0.3, -0.2)] {
            assert_eq!(log_likelihood_sic(y, h, 0.01, &chi), log_likelihood_nonsic(y, h, 0.01, &ck));
            assert_eq!(classify_single(y, h, 0.01, &chi), Hypothesis::NonSic);
        }
    }

    #[test]
    fn multi_rejects_even_or_empty() {
        let chi = qpsk_16qam(0.24);
        let h = Complex64::new(1.0, 0.0);
        for l in [0, 2, 4] {
            let obs = Observation { samples: vec![Complex64::new(0.1, 0.1); l], h, noise_var: 1.0 };
            assert!(classify_multi(&obs, &chi).is_err());
        }
    }

    #[test]
    fn multi_majority_vote() {
        let chi = qpsk_16qam(0.24);
        let h = Complex64::new(1.0, 0.0);
        let nv = 1e-3;
        let sic_sample = chi.points()[chi.index(0, 15)];
        let nonsic_sample = chi.parent_k().points()[0] * 1.0;
        assert_eq!(classify_single(sic_sample, h, nv, &chi), Hypothesis::Sic);
        let nonsic_vote = classify_single(nonsic_sample, h, nv, &chi);
        assert_eq!(nonsic_vote, Hypothesis::NonSic);
        let obs = Observation { samples: vec![sic_sample, nonsic_sample, sic_sample], h, noise_var: nv };
        assert_eq!(classify_multi(&obs, &chi).unwrap(), Hypothesis::Sic);
        let obs = Observation { samples: vec![sic_sample; 5], h, noise_var: nv };
        assert_eq!(classify_multi(&obs, &chi).unwrap(), Hypothesis::Sic);
        let obs = Observation { samples: vec![nonsic_sample, nonsic_sample, sic_sample], h, noise_var: nv };
        assert_eq!(classify_multi(&obs, &chi).unwrap(), Hypothesis::NonSic);
    }

    #[test]
    fn multi_with_one_sample_equals_single() {
        let chi = qpsk_16qam(0.24);
        let mut rng = substream(3, Stream::Trials, 0);
        for _ in 0..2000 {
            let h = complex_normal(&mut rng);
            let y = complex_normal(&mut rng);
            let obs = Observation { samples: vec![y], h, noise_var: 0.1 };
            assert_eq!(classify_multi(&obs, &chi).unwrap(), classify_single(y, h, 0.1, &chi));
        }
    }

    fn sic_error_rate(gamma_n: f64, snr_db: f64, l: usize, trials: u64, seed: u64) -> f64 {
        let chi = qpsk_16qam(gamma_n);
        let nv = 10f64.powf(-snr_db / 10.0);
        let h = Complex64::new(1.0, 0.0);
        let mut errors = 0u64;
        for t in 0..trials {
            let mut rng = substream(seed, Stream::Trials, t);
            let samples = (0..l)
                .map(|_| h * chi.points()[rng.random_range(0..chi.len())] + complex_normal(&mut rng) * nv.sqrt())
                .collect();
            let obs = Observation { samples, h, noise_var: nv };
            if classify_multi(&obs, &chi).unwrap() == Hypothesis::NonSic {
                errors += 1;
            }
        }
        errors as f64 / trials as f64
    }

    #[test]
    fn sic_user_reliable_at_30_db() {
        assert!(sic_error_rate(0.24, 30.0, 1, 10_000, 4) < 0.05);
    }

    #[test]
    fn more_samples_reduce_sic_error() {
        let one = sic_error_rate(0.24, 20.0, 1, 10_000, 5);
        let five = sic_error_rate(0.24, 20.0, 5, 10_000, 5);
        assert!(five < one, "L=5 {five} vs L=1 {one}");
    }

    #[test]
    fn m_user_two_reduces_to_single() {
        let ck = make_qam(4, 0.76).unwrap();
        let cn = make_qam(16, 0.24).unwrap();
        let chi = superpose(&ck, &cn).unwrap();
        let sets = hypothesis_point_sets(&[cn.clone(), ck.clone()]);
        assert_eq!(sets[0].len(), 64);
        assert_eq!(sets[1].len(), 4);
        let mut rng = substream(6, Stream::Trials, 0);
        for _ in 0..2000 {
            let h = complex_normal(&mut rng);
            let y = h * chi.points()[rng.random_range(0..64)] + complex_normal(&mut rng) * 0.3;
            let m0 = classify_m_user(y, h, 0.09, &sets).unwrap();
            let expect = match classify_single(y, h, 0.09, &chi) {
                Hypothesis::Sic => 1,
                Hypothesis::NonSic => 2,
            };
            assert_eq!(m0, expect);
        }
    }

    #[test]
    fn m_user_strong_noiseless_is_user_one() {
        let cs = [make_qam(4, 0.1).unwrap(), make_qam(4, 0.3).unwrap(), make_qam(4, 0.6).unwrap()];
        let sets = hypothesis_point_sets(&cs);
        let h = Complex64::new(1.0, 0.0);
        for &y in &sets[0] {
            assert_eq!(classify_m_user(y, h, 1e-4, &sets).unwrap(), 1);
        }
        assert!(classify_m_user(h, h, 1.0, &[]).is_err());
    }

    #[test]
    fn m_user_matches_brute_force_argmax() {
        let cs = [make_qam(4, 0.1).unwrap(), make_qam(4, 0.3).unwrap(), make_qam(4, 0.6).unwrap()];
        let sets = hypothesis_point_sets(&cs);
        assert_eq!(sets.iter().map(Vec::len).collect::<Vec<_>>(), vec![64, 16, 4]);
        // Independent brute force: enumerate every symbol tuple explicitly.
        let brute_sets: Vec<Vec<Complex64>> = vec![
            {
                let mut all = Vec::new();
                for &a in cs[0].points() {
                    for &b in cs[1].points() {
                        for &c in cs[2].points() {
                            all.push(a + b + c);
                        }
                    }
                }
                all
            },
            cs[1].points().iter().flat_map(|&b| cs[2].points().iter().map(move |&c| b + c)).collect(),
            cs[2].points().to_vec(),
        ];
        let mut rng = substream(8, Stream::Trials, 0);
        for _ in 0..3000 {
            let h = complex_normal(&mut rng);
            let nv = 10f64.powf(-rng.random_range(0.0..3.0));
            let y = h * brute_sets[0][rng.random_range(0..64)] + complex_normal(&mut rng) * nv.sqrt();
            let dens: Vec<f64> = brute_sets.iter().map(|s| direct_density(y, h, nv, s)).collect();
            let mut arg = 0;
            for m in 1..3 {
                if dens[m] > dens[arg] {
                    arg = m;
                }
            }
            // Skip near-ties where direct summation and log-sum-exp may disagree.
            let mut sorted = dens.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if sorted[0] > 0.0 && (sorted[0] - sorted[1]) / sorted[0] < 1e-9 {
                continue;
            }
            assert_eq!(classify_m_user(y, h, nv, &sets).unwrap(), arg + 1);
        }
    }

    #[test]
    fn monotone_error_trends() {
        // SIC-user error falls and non-SIC-user error rises with SNR.
        let chi = qpsk_16qam(0.24);
        let h = Complex64::new(1.0, 0.0);
        let trials = 10_000u64;
        let mut sic_err = Vec::new();
        let mut nonsic_err = Vec::new();
        for (i, snr_db) in [0.0, 10.0, 20.0, 30.0].into_iter().enumerate() {
            let nv = 10f64.powf(-snr_db / 10.0);
            let (mut e_sic, mut e_non) = (0u64, 0u64);
            for t in 0..trials {
                let mut rng = substream(100 + i as u64, Stream::Trials, t);
                let s = chi.points()[rng.random_range(0..chi.len())];
                let y1 = h * s + complex_normal(&mut rng) * nv.sqrt();
                let y2 = h * s + complex_normal(&mut rng) * nv.sqrt();
                e_sic += (classify_single(y1, h, nv, &chi) == Hypothesis::NonSic) as u64;
                e_non += (classify_single(y2, h, nv, &chi) == Hypothesis::Sic) as u64;
            }
            sic_err.push(e_sic as f64 / trials as f64);
            nonsic_err.push(e_non as f64 / trials as f64);
        }
        let se = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
        let viol_sic = sic_err.windows(2).filter(|w| w[1] > w[0] + se(w[0])).count();
        let viol_non = nonsic_err.windows(2).filter(|w| w[1] < w[0] - se(w[0])).count();
        let soft_sic = sic_err.windows(2).filter(|w| w[1] > w[0]).count();
        let soft_non = nonsic_err.windows(2).filter(|w| w[1] < w[0]).count();
        assert_eq!(viol_sic, 0, "{sic_err:?}");
        assert_eq!(viol_non, 0, "{nonsic_err:?}");
        assert!(soft_sic <= 1 && soft_non <= 1);
    }
}
