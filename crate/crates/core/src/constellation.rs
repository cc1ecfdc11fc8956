//! Square QAM constellations, superposition sets and rectangular decision
//! regions.
//!
//! Base constellations are normalized to unit average energy and then scaled
//! by `sqrt(power_weight)`, so the mean symbol energy equals the power weight.
//! A composite point `m` is `s_k(i) + s_n(l)` with `m = i * |chi_n| + l`.

use num_complex::Complex64;

use crate::error::{param, NomaError, Result};

/// Coordinates closer than this are treated as the same grid line.
pub const GRID_SNAP_TOL: f64 = 1e-9;
/// Composite points closer than this make the constellation degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

pub const SUPPORTED_ORDERS: [usize; 3] = [4, 16, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    order: usize,
    power_weight: f64,
}

impl Constellation {
    /// Arbitrary point set, used for hypothetical or hand-built cases. The
    /// power weight is taken as the mean symbol energy.
    pub fn from_points(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return param("empty constellation");
        }
        let power_weight = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        Ok(Self { order: points.len(), points, power_weight })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn power_weight(&self) -> f64 {
        self.power_weight
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

/// Axis-aligned decision rectangle. Outer edges may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRegion {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl DecisionRegion {
    /// Half-open membership test, `[lo, hi)` on both axes, so that a tiling
    /// assigns every point to exactly one region.
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_lo && z.re < self.re_hi && z.im >= self.im_lo && z.im < self.im_hi
    }
}

#[derive(Debug, Clone)]
pub struct CompositeConstellation {
    points: Vec<Complex64>,
    parent_k: Constellation,
    parent_n: Constellation,
    regions: Vec<DecisionRegion>,
}

impl CompositeConstellation {
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Constellation of the non-SIC user (the larger power share).
    pub fn parent_k(&self) -> &Constellation {
        &self.parent_k
    }

    /// Constellation of the SIC user.
    pub fn parent_n(&self) -> &Constellation {
        &self.parent_n
    }

    pub fn regions(&self) -> &[DecisionRegion] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Canonical composite index of the pair `(i, l)`.
    pub fn index(&self, i: usize, l: usize) -> usize {
        i * self.parent_n.len() + l
    }
}

/// QAM orders of the non-SIC user `k` and the SIC user `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModulationPair {
    pub order_k: usize,
    pub order_n: usize,
}

impl ModulationPair {
    pub const fn new(order_k: usize, order_n: usize) -> Self {
        Self { order_k, order_n }
    }

    /// Composite constellation for the power split `(1 - gamma_n, gamma_n)`.
    pub fn composite(&self, gamma_n: f64) -> Result<CompositeConstellation> {
        let ck = make_qam(self.order_k, 1.0 - gamma_n)?;
        let cn = make_qam(self.order_n, gamma_n)?;
        superpose(&ck, &cn)
    }
}

/// Unit-energy square M-QAM scaled to mean energy `power_weight`.
///
/// Points are listed with the in-phase level as the outer loop, both axes in
/// ascending order.
pub fn make_qam(order: usize, power_weight: f64) -> Result<Constellation> {
    if !SUPPORTED_ORDERS.contains(&order) {
        return param(format!("unsupported QAM order {order}, expected one of 4, 16, 64"));
    }
    if !(power_weight > 0.0 && power_weight <= 1.0) {
        return param(format!("power weight {power_weight} outside (0, 1]"));
    }
    let side = (order as f64).sqrt().round() as usize;
    let levels: Vec<f64> = (0..side).map(|j| (2 * j) as f64 - (side - 1) as f64).collect();
    // Mean energy of the odd-integer grid is 2 (M - 1) / 3.
    let scale = (power_weight / (2.0 * (order as f64 - 1.0) / 3.0)).sqrt();
    let points = levels
        .iter()
        .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re * scale, im * scale)))
        .collect();
    Ok(Constellation { points, order, power_weight })
}

/// All sums `s_k(i) + s_n(l)` with rectangular decision regions attached.
pub fn superpose(ck: &Constellation, cn: &Constellation) -> Result<CompositeConstellation> {
    let total = ck.power_weight + cn.power_weight;
    if (total - 1.0).abs() > 1e-9 {
        return param(format!("power weights sum to {total}, expected 1"));
    }
    let points: Vec<Complex64> = ck
        .points
        .iter()
        .flat_map(|&sk| cn.points.iter().map(move |&sn| sk + sn))
        .collect();

    let min_distance = min_pairwise_distance(&points);
    if min_distance <= DEGENERACY_TOL {
        return Err(NomaError::DegenerateConstellation { min_distance });
    }
    let regions = decision_regions(&points)?;
    Ok(CompositeConstellation { points, parent_k: ck.clone(), parent_n: cn.clone(), regions })
}

fn min_pairwise_distance(points: &[Complex64]) -> f64 {
    let mut min = f64::INFINITY;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            min = min.min((p - q).norm());
        }
    }
    min
}

/// Sorted unique coordinates, merging values within [`GRID_SNAP_TOL`].
fn grid_lines(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let mut lines: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match lines.last() {
            Some(&last) if (x - last).abs() <= GRID_SNAP_TOL => {}
            _ => lines.push(x),
        }
    }
    lines
}

fn snap(lines: &[f64], x: f64) -> Option<usize> {
    let pos = lines.partition_point(|&v| v < x - GRID_SNAP_TOL);
    (pos < lines.len() && (lines[pos] - x).abs() <= GRID_SNAP_TOL).then_some(pos)
}

fn interval(lines: &[f64], pos: usize) -> (f64, f64) {
    let lo = if pos == 0 { f64::NEG_INFINITY } else { 0.5 * (lines[pos - 1] + lines[pos]) };
    let hi = if pos + 1 == lines.len() { f64::INFINITY } else { 0.5 * (lines[pos] + lines[pos + 1]) };
    (lo, hi)
}

/// Rectangular decision regions of a Cartesian-grid point set.
///
/// Boundaries sit at midpoints between adjacent grid lines; the outermost
/// boundaries are infinite. Fails unless the set is exactly the product of
/// its unique real and imaginary coordinates.
pub fn decision_regions(points: &[Complex64]) -> Result<Vec<DecisionRegion>> {
    if points.is_empty() {
        return param("empty point set");
    }
    let re_lines = grid_lines(points.iter().map(|p| p.re));
    let im_lines = grid_lines(points.iter().map(|p| p.im));
    if re_lines.len() * im_lines.len() != points.len() {
        return Err(NomaError::NonRectangularRegions);
    }
    let mut seen = vec![false; points.len()];
    let mut regions = Vec::with_capacity(points.len());
    for p in points {
        let (Some(r), Some(i)) = (snap(&re_lines, p.re), snap(&im_lines, p.im)) else {
            return Err(NomaError::NonRectangularRegions);
        };
        let cell = r * im_lines.len() + i;
        if std::mem::replace(&mut seen[cell], true) {
            return Err(NomaError::NonRectangularRegions);
        }
        let (re_lo, re_hi) = interval(&re_lines, r);
        let (im_lo, im_hi) = interval(&im_lines, i);
        regions.push(DecisionRegion { re_lo, re_hi, im_lo, im_hi });
    }
    Ok(regions)
}

/// Indices of the points strictly inside the first quadrant.
pub fn first_quadrant_indices(c: &Constellation) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(c.len() / 4);
    for (idx, p) in c.points.iter().enumerate() {
        if p.re.abs() < 1e-12 || p.im.abs() < 1e-12 {
            return Err(NomaError::SymmetryViolation { index: idx });
        }
        if p.re > 0.0 && p.im > 0.0 {
            out.push(idx);
        }
    }
    Ok(out)
}
