//! Asymmetric bands `[-φ(b), b]` for base densities that are not symmetric,
//! and the squared-residual detector for variance contamination.

use serde::{Deserialize, Serialize};

use crate::densities::{integrate, roots, Density};
use crate::detect::{
    assemble, check_threshold, sample_mean, BandGrid, DetectionResult, ProfilePoint, Sample,
    SortedBand, SplitOutcome,
};
use crate::error::{Error, Result};

const MOMENT_TOLERANCE: f64 = 1e-12;

/// `φ(b) = 1 - b/(e^b - 1)`, with the limit `φ(0) = 0`.
pub fn phi_closed_form(b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        1.0 - b / b.exp_m1()
    }
}

/// `φ ≥ 0` solving `∫_{-φ}^{b} y f0(y) dy = 0`.
///
/// The search runs over `[0, -lo]` where `lo` is the left end of the support
/// of `f0`. Fails with [`Error::NoRoot`] when even the whole left tail cannot
/// balance the mass on `(0, b]`.
pub fn phi_numeric(f0: &dyn Density, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::invalid(format!("b must be positive, got {b}")));
    }
    let (lo, hi) = f0.support();
    if !(lo < 0.0) {
        return Err(Error::NoRoot { lo: 0.0, hi: 0.0 });
    }
    let moment = |a: f64, c: f64| -> Result<f64> {
        let (a, c) = (a.max(lo), c.min(hi));
        if a >= c {
            return Ok(0.0);
        }
        integrate(|y| y * f0.pdf(y), a, c, MOMENT_TOLERANCE)
    };
    let upper = moment(0.0, b)?;
    let phi_max = -lo;
    let q = |phi: f64| -> f64 { upper + moment(-phi, 0.0).unwrap_or(f64::NAN) };
    if upper == 0.0 {
        return Ok(0.0);
    }
    if q(phi_max) > 0.0 {
        return Err(Error::NoRoot { lo: 0.0, hi: phi_max });
    }
    roots::bisect(q, 0.0, phi_max, 1e-10)
}

/// Detection result for the squared-residual sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceDetection {
    pub result: DetectionResult,
    /// Mean of the raw sample.
    pub mu_hat: f64,
    /// `N₂(b*_N)/N`.
    pub eps_hat: f64,
}

fn two_sided_profile(
    y: &[f64],
    theta: f64,
    grid: &BandGrid,
    bounds: impl Fn(f64) -> Option<(f64, f64)>,
) -> Vec<ProfilePoint> {
    let band = SortedBand::new(y.iter().map(|&v| (v, v - theta)).collect());
    grid.points()
        .iter()
        .filter_map(|&b| {
            let (lo, hi) = bounds(b)?;
            let (psi, n1) = band.psi_range(band.count_below(lo), band.count_at_most(hi));
            Some(ProfilePoint { b, psi, n1 })
        })
        .collect()
}

fn squared_residuals(s: &Sample) -> Result<(f64, Vec<f64>, f64)> {
    if s.len() < 3 {
        return Err(Error::invalid("variance detection needs at least 3 observations"));
    }
    let mu = sample_mean(s.values());
    let y: Vec<f64> = s.values().iter().map(|&x| (x - mu) * (x - mu)).collect();
    let theta = sample_mean(&y);
    if theta == 0.0 {
        return Err(Error::Degenerate("sample has zero spread".into()));
    }
    Ok((mu, y, theta))
}

fn variance_bounds(theta: f64, b: f64) -> (f64, f64) {
    (theta * (1.0 - phi_closed_form(b)), theta * (1.0 + b))
}

/// `max_b |Ψ_N(b)|` on the squared residuals, for calibration loops.
pub fn variance_max_statistic(values: &[f64], grid: &BandGrid) -> Result<f64> {
    let s = Sample::new(values.to_vec())?;
    let (_, y, theta) = squared_residuals(&s)?;
    Ok(two_sided_profile(&y, theta, grid, |b| Some(variance_bounds(theta, b)))
        .iter()
        .map(|p| p.psi.abs())
        .fold(0.0, f64::max))
}

/// Squared residuals `yᵢ = (xᵢ - μ̂)²` are split by
/// `θ(1 - φ(b)) ≤ yᵢ ≤ θ(1 + b)` with `θ` the mean of `y`.
pub fn detect_variance_contamination(
    s: &Sample,
    grid: &BandGrid,
    threshold_c: f64,
) -> Result<VarianceDetection> {
    check_threshold(threshold_c)?;
    let (mu_hat, y, theta) = squared_residuals(s)?;
    let profile = two_sided_profile(&y, theta, grid, |b| Some(variance_bounds(theta, b)));
    let result = assemble(profile, threshold_c, |b| {
        let (lo, hi) = variance_bounds(theta, b);
        SplitOutcome::from_predicate(b, theta, y.len(), |i| lo <= y[i] && y[i] <= hi)
    });
    let eps_hat = result.split_at_bstar.n2 as f64 / y.len() as f64;
    Ok(VarianceDetection {
        result,
        mu_hat,
        eps_hat,
    })
}

/// General asymmetric method: `yᵢ = xᵢ - θ_N` is ordinary when
/// `-φ(b) ≤ yᵢ ≤ b`, with `φ` solved numerically for `f0`. Grid points where
/// no `φ` exists are left out of the profile.
pub fn detect_asymmetric(
    s: &Sample,
    grid: &BandGrid,
    f0: &dyn Density,
    threshold_c: f64,
) -> Result<DetectionResult> {
    check_threshold(threshold_c)?;
    let theta = sample_mean(s.values());
    let y: Vec<f64> = s.values().iter().map(|&x| x - theta).collect();
    let phis: Vec<Option<f64>> = grid.points().iter().map(|&b| phi_numeric(f0, b).ok()).collect();
    let lookup = |b: f64| {
        let k = grid.points().partition_point(|&p| p < b);
        phis.get(k).copied().flatten()
    };
    let profile = two_sided_profile(&y, 0.0, grid, |b| lookup(b).map(|phi| (-phi, b)));
    if profile.is_empty() {
        return Err(Error::invalid("no grid point admits a solution of the moment condition"));
    }
    Ok(assemble(profile, threshold_c, |b| {
        let phi = lookup(b).expect("b* comes from the profile");
        SplitOutcome::from_predicate(b, theta, y.len(), |i| -phi <= y[i] && y[i] <= b)
    }))
}
