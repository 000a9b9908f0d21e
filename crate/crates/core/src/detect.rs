//! Band-split detection for symmetric base densities.
//!
//! The sample is split by a band of half-width `b` around its mean. For each
//! `b` on a grid the statistic
//!
//! ```text
//! Ψ_N(b) = (N₂ Σ ordinary − N₁ Σ abnormal) / N²
//! ```
//!
//! is evaluated and the homogeneity hypothesis is rejected when
//! `max_b |Ψ_N(b)|` exceeds a calibrated threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::{prefix_sums, sum, CompensatedSum};

/// Default lower end of the band grid.
pub const DEFAULT_KAPPA: f64 = 0.04;
/// Default upper end of the band grid.
pub const DEFAULT_B: f64 = 50.0;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 512;

/// An ordered sequence of at least two finite observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "a sample needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("observation {} is not finite", i + 1)));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sub-sample at the given indices, in index order.
    pub fn select(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.values[i]).collect()
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Sample::new(v)
    }
}

impl From<Sample> for Vec<f64> {
    fn from(s: Sample) -> Self {
        s.values
    }
}

/// Strictly increasing set of band half-widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct BandGrid {
    points: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    points: Vec<f64>,
}

impl TryFrom<GridRepr> for BandGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        BandGrid::from_points(r.points)
    }
}

impl From<BandGrid> for GridRepr {
    fn from(g: BandGrid) -> Self {
        GridRepr { points: g.points }
    }
}

impl BandGrid {
    fn check_ends(kappa: f64, b_max: f64, n: usize) -> Result<()> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
        }
        if !(b_max > kappa) || !b_max.is_finite() {
            return Err(Error::invalid(format!("B must exceed kappa, got B = {b_max}")));
        }
        if n < 2 {
            return Err(Error::invalid("a band grid needs at least 2 points"));
        }
        Ok(())
    }

    /// `n` points spaced geometrically from `kappa` to `b_max` inclusive.
    pub fn geometric(kappa: f64, b_max: f64, n: usize) -> Result<Self> {
        Self::check_ends(kappa, b_max, n)?;
        let step = (b_max / kappa).ln() / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| kappa * (step * i as f64).exp()).collect();
        points[0] = kappa;
        points[n - 1] = b_max;
        Self::from_points(points)
    }

    /// `n` evenly spaced points from `kappa` to `b_max` inclusive.
    pub fn linear(kappa: f64, b_max: f64, n: usize) -> Result<Self> {
        Self::check_ends(kappa, b_max, n)?;
        let step = (b_max - kappa) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| kappa + step * i as f64).collect();
        points[n - 1] = b_max;
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a band grid needs at least 2 points"));
        }
        if !(points[0] > 0.0) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("band grid points must be positive and finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("band grid points must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kappa(&self) -> f64 {
        self.points[0]
    }

    pub fn b_max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid with every point multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_points(self.points.iter().map(|p| p * factor).collect())
    }
}

impl Default for BandGrid {
    fn default() -> Self {
        Self::geometric(DEFAULT_KAPPA, DEFAULT_B, DEFAULT_POINTS).expect("default grid is valid")
    }
}

/// Partition of a sample by one band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub b: f64,
    pub theta: f64,
    pub n1: usize,
    pub n2: usize,
    pub ordinary_idx: Vec<usize>,
    pub abnormal_idx: Vec<usize>,
}

impl SplitOutcome {
    pub(crate) fn from_predicate(b: f64, theta: f64, n: usize, ordinary: impl Fn(usize) -> bool) -> Self {
        let (ordinary_idx, abnormal_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ordinary(i));
        Self {
            b,
            theta,
            n1: ordinary_idx.len(),
            n2: abnormal_idx.len(),
            ordinary_idx,
            abnormal_idx,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    AcceptH0,
    RejectH0,
}

impl Decision {
    pub fn from_statistic(j_stat: f64, threshold_c: f64) -> Self {
        if j_stat > threshold_c {
            Decision::RejectH0
        } else {
            Decision::AcceptH0
        }
    }

    pub fn rejects(self) -> bool {
        self == Decision::RejectH0
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::AcceptH0 => "AcceptH0",
            Decision::RejectH0 => "RejectH0",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub b: f64,
    pub psi: f64,
    pub n1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub profile: Vec<ProfilePoint>,
    pub j_stat: f64,
    pub b_star_n: f64,
    pub decision: Decision,
    pub threshold_c: f64,
    pub split_at_bstar: SplitOutcome,
}

impl DetectionResult {
    pub fn n(&self) -> usize {
        self.split_at_bstar.n1 + self.split_at_bstar.n2
    }

    pub fn theta(&self) -> f64 {
        self.split_at_bstar.theta
    }
}

pub(crate) fn check_threshold(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold must be positive, got {c}")))
    }
}

/// Index of the first entry with the largest absolute value.
pub(crate) fn first_argmax(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn sample_mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Ordinary iff `|x - θ| < b`; a point exactly on the boundary is abnormal.
pub fn split(s: &Sample, b: f64) -> SplitOutcome {
    let theta = sample_mean(s.values());
    let v = s.values();
    SplitOutcome::from_predicate(b, theta, v.len(), |i| (v[i] - theta).abs() < b)
}

/// `Ψ_N(b)` evaluated term by term as `(N₂ Σ ordinary − N₁ Σ abnormal) / N²`.
pub fn psi_stat(s: &Sample, b: f64) -> f64 {
    let theta = sample_mean(s.values());
    let (mut s1, mut s2) = (CompensatedSum::new(), CompensatedSum::new());
    let (mut n1, mut n2) = (0usize, 0usize);
    for &x in s.values() {
        if (x - theta).abs() < b {
            s1.add(x);
            n1 += 1;
        } else {
            s2.add(x);
            n2 += 1;
        }
    }
    let n = s.len() as f64;
    (n2 as f64 * s1.value() - n1 as f64 * s2.value()) / (n * n)
}

/// The equivalent form `(N Σ ordinary − N₁ Σ all) / N²`.
pub fn psi_stat_total_form(s: &Sample, b: f64) -> f64 {
    let theta = sample_mean(s.values());
    let mut s1 = CompensatedSum::new();
    let mut n1 = 0usize;
    for &x in s.values() {
        if (x - theta).abs() < b {
            s1.add(x);
            n1 += 1;
        }
    }
    let total = sum(s.values().iter().copied());
    let n = s.len() as f64;
    (n * s1.value() - n1 as f64 * total) / (n * n)
}

/// Observations sorted by a distance key, with prefix sums of their
/// centered values. Evaluates `Ψ_N` for any band in `O(log N)`.
pub(crate) struct SortedBand {
    keys: Vec<f64>,
    prefix: Vec<f64>,
    n: usize,
}

impl SortedBand {
    /// `pairs` holds `(key, centered value)` for each observation.
    pub(crate) fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let prefix = prefix_sums(pairs.iter().map(|p| p.1));
        let keys = pairs.into_iter().map(|p| p.0).collect();
        Self { keys, prefix, n }
    }

    /// Number of keys strictly below `b`.
    pub(crate) fn count_below(&self, b: f64) -> usize {
        self.keys.partition_point(|&k| k < b)
    }

    /// Number of keys at most `b`.
    pub(crate) fn count_at_most(&self, b: f64) -> usize {
        self.keys.partition_point(|&k| k <= b)
    }

    /// `Ψ` for the ordinary set made of sorted positions `lo..hi`.
    pub(crate) fn psi_range(&self, lo: usize, hi: usize) -> (f64, usize) {
        let n = self.n as f64;
        let n1 = hi - lo;
        let n2 = self.n - n1;
        let s1 = self.prefix[hi] - self.prefix[lo];
        let s2 = self.prefix[self.n] - s1;
        ((n2 as f64 * s1 - n1 as f64 * s2) / (n * n), n1)
    }
}

fn symmetric_band(values: &[f64], theta: f64) -> SortedBand {
    SortedBand::new(values.iter().map(|&x| ((x - theta).abs(), x - theta)).collect())
}

/// `Ψ_N(b)` at every grid point, computed from one sort of the sample.
pub fn profile(s: &Sample, grid: &BandGrid) -> Vec<ProfilePoint> {
    let theta = sample_mean(s.values());
    let band = symmetric_band(s.values(), theta);
    grid.points()
        .iter()
        .map(|&b| {
            let (psi, n1) = band.psi_range(0, band.count_below(b));
            ProfilePoint { b, psi, n1 }
        })
        .collect()
}

/// `max_b |Ψ_N(b)|` without building the profile.
pub fn max_statistic(values: &[f64], grid: &BandGrid) -> f64 {
    let theta = sample_mean(values);
    let band = symmetric_band(values, theta);
    grid.points()
        .iter()
        .map(|&b| band.psi_range(0, band.count_below(b)).0.abs())
        .fold(0.0, f64::max)
}

pub(crate) fn assemble(
    profile: Vec<ProfilePoint>,
    threshold_c: f64,
    split_at: impl FnOnce(f64) -> SplitOutcome,
) -> DetectionResult {
    let (k, j_stat) = first_argmax(profile.iter().map(|p| p.psi.abs()));
    let b_star_n = profile[k].b;
    DetectionResult {
        j_stat,
        b_star_n,
        decision: Decision::from_statistic(j_stat, threshold_c),
        threshold_c,
        split_at_bstar: split_at(b_star_n),
        profile,
    }
}

pub fn detect(s: &Sample, grid: &BandGrid, threshold_c: f64) -> Result<DetectionResult> {
    check_threshold(threshold_c)?;
    Ok(assemble(profile(s, grid), threshold_c, |b| split(s, b)))
}
