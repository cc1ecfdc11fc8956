//! User placement, Rayleigh fading with `1/d^2` path loss, and circularly
//! symmetric Gaussian noise.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, Result};
use crate::rng::{substream, Stream};

/// Users closer than this to the base station are not generated.
pub const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub h: Complex64,
    pub distance: f64,
    pub noise_var: f64,
}

impl LinkState {
    pub fn new(h: Complex64, distance: f64, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return param(format!("noise variance {noise_var} must be positive and finite"));
        }
        Ok(Self { h, distance, noise_var })
    }

    /// Link with a real channel gain chosen to hit `snr` at unit noise.
    pub fn from_snr(snr: f64) -> Result<Self> {
        if !(snr >= 0.0 && snr.is_finite()) {
            return param(format!("snr {snr} must be non-negative"));
        }
        Self::new(Complex64::new(snr.sqrt(), 0.0), 1.0, 1.0)
    }

    /// Received SNR `|h|^2 / sigma^2`.
    pub fn snr(&self) -> f64 {
        self.h.norm_sqr() / self.noise_var
    }

    pub fn gain(&self) -> f64 {
        self.h.norm_sqr()
    }
}

/// One realization of `K` users, strongest channel first.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    pub links: Vec<LinkState>,
    pub seed: u64,
}

impl UserDrop {
    /// Builds a drop from arbitrary links, sorting them by descending gain.
    pub fn from_links(mut links: Vec<LinkState>, seed: u64) -> Result<Self> {
        if links.len() < 2 {
            return param(format!("need at least 2 users, got {}", links.len()));
        }
        links.sort_by(|a, b| b.gain().total_cmp(&a.gain()));
        Ok(Self { links, seed })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Link of the user with 1-based rank `rank` (1 = strongest).
    pub fn user(&self, rank: usize) -> &LinkState {
        &self.links[rank - 1]
    }

    /// Same placement and fading with a different noise variance.
    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        let links = self
            .links
            .iter()
            .map(|l| LinkState::new(l.h, l.distance, noise_var))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { links, seed: self.seed })
    }
}

/// Draws one `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `K` users uniform over the annulus `MIN_DISTANCE <= d <= radius`, with
/// `h = g / d` and `g ~ CN(0, 1)`.
pub fn drop_users(count: usize, radius: f64, noise_var: f64, seed: u64) -> Result<UserDrop> {
    if count < 2 {
        return param(format!("need at least 2 users, got {count}"));
    }
    if !(radius > MIN_DISTANCE && radius.is_finite()) {
        return param(format!("radius {radius} must exceed the {MIN_DISTANCE} m exclusion radius"));
    }
    let mut placement = substream(seed, Stream::Placement, 0);
    let mut fading = substream(seed, Stream::Fading, 0);
    let (r0, r1) = (MIN_DISTANCE * MIN_DISTANCE, radius * radius);
    let links = (0..count)
        .map(|_| {
            // Inverse CDF of the uniform-area radius on the annulus.
            let u: f64 = placement.random();
            let d = (r0 + u * (r1 - r0)).sqrt();
            let g = complex_normal(&mut fading);
            LinkState::new(g / d, d, noise_var)
        })
        .collect::<Result<Vec<_>>>()?;
    UserDrop::from_links(links, seed)
}

/// `count` i.i.d. `CN(0, noise_var)` samples.
pub fn sample_noise<R: Rng + ?Sized>(noise_var: f64, count: usize, rng: &mut R) -> Result<Vec<Complex64>> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return param(format!("noise variance {noise_var} must be positive and finite"));
    }
    let scale = noise_var.sqrt();
    Ok((0..count).map(|_| complex_normal(rng) * scale).collect())
}
