//! Recovery of the contamination weight `ε` and shift `h` after a rejection.

use serde::{Deserialize, Serialize};

use crate::densities::{roots, Density, Density1D};
use crate::detect::DetectionResult;
use crate::error::{Error, Result};

/// Lower end of the solver bracket for `ε̂`; the upper end is `1/2 - EPS_MIN`.
pub const EPS_MIN: f64 = 1e-6;
/// Smallest admissible `|f0(θ+b) - f0(θ-b)|`.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;
const EPS_SCAN_POINTS: usize = 2000;

/// `ε_N = N₂(b*_N)/N` and `h_N = θ_N/ε_N`; `h` is `None` when `N₂ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonparametricEstimate {
    pub eps: f64,
    pub h: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistentEstimate {
    pub eps_hat: f64,
    pub h_hat: f64,
    /// `|G(ε̂)|` for the reduced scalar equation.
    pub residual: f64,
    /// More than one sign change was found on the bracket.
    pub multiple_roots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub b_star_n: f64,
    pub theta: f64,
    pub eps_nonpar: f64,
    pub h_nonpar: Option<f64>,
    pub consistent: Option<ConsistentEstimate>,
    /// Why the consistent pair is missing, when `f0` was supplied.
    pub consistent_error: Option<String>,
}

pub fn nonparametric(n2: usize, n: usize, theta: f64) -> NonparametricEstimate {
    let eps = n2 as f64 / n as f64;
    NonparametricEstimate {
        eps,
        h: (n2 > 0).then(|| theta / eps),
    }
}

pub fn estimate_nonparametric(det: &DetectionResult) -> Result<NonparametricEstimate> {
    if !det.decision.rejects() {
        return Err(Error::invalid("estimation requires a rejected homogeneity hypothesis"));
    }
    Ok(nonparametric(det.split_at_bstar.n2, det.n(), det.theta()))
}

/// Solves for `(ε̂, ĥ)` given `θ_N`, `b*_N` and the base density `f0`.
///
/// With `ĥ = (θ - μ0)/ε̂`, where `μ0` is the mean of `f0`, the system reduces to
///
/// ```text
/// G(e) = (1-e)·[f0(θ+b) - f0(θ-b)] - e·[f0(θ-b-ĥ(e)) - f0(θ+b-ĥ(e))] = 0
/// ```
///
/// which is scanned on `(EPS_MIN, 1/2 - EPS_MIN)` and bisected. When several
/// roots exist the one nearest `hint` (usually `ε_N`) is returned.
pub fn estimate_consistent(
    theta: f64,
    b_star: f64,
    f0: &Density1D,
    hint: Option<f64>,
) -> Result<ConsistentEstimate> {
    let offset = theta - f0.mean();
    if offset == 0.0 || !offset.is_finite() {
        return Err(Error::invalid("θ must differ from the mean of f0"));
    }
    if !(b_star > 0.0) {
        return Err(Error::invalid(format!("b* must be positive, got {b_star}")));
    }
    let denom = f0.pdf(theta + b_star) - f0.pdf(theta - b_star);
    if denom.abs() < DENOMINATOR_FLOOR {
        return Err(Error::IllConditioned { denominator: denom.abs() });
    }
    let g = |e: f64| {
        let h = offset / e;
        (1.0 - e) * denom - e * (f0.pdf(theta - b_star - h) - f0.pdf(theta + b_star - h))
    };
    let (lo, hi) = (EPS_MIN, 0.5 - EPS_MIN);
    let step = (hi - lo) / (EPS_SCAN_POINTS - 1) as f64;
    let points: Vec<f64> = (0..EPS_SCAN_POINTS).map(|i| lo + step * i as f64).collect();
    let roots = roots::all_roots(g, &points, 0.0)?;
    let target = hint.unwrap_or(0.0);
    let eps_hat = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .ok_or(Error::NoSolution)?;
    Ok(ConsistentEstimate {
        eps_hat,
        h_hat: offset / eps_hat,
        residual: g(eps_hat).abs(),
        multiple_roots: roots.len() > 1,
    })
}

/// Both estimate pairs from a detection result. The consistent pair is only
/// attempted when `f0` is known.
pub fn estimate(det: &DetectionResult, f0: Option<&Density1D>) -> Result<EstimationResult> {
    let np = estimate_nonparametric(det)?;
    let mut out = EstimationResult {
        b_star_n: det.b_star_n,
        theta: det.theta(),
        eps_nonpar: np.eps,
        h_nonpar: np.h,
        consistent: None,
        consistent_error: None,
    };
    if let Some(f0) = f0 {
        match estimate_consistent(det.theta(), det.b_star_n, f0, Some(np.eps)) {
            Ok(c) => out.consistent = Some(c),
            Err(e) => out.consistent_error = Some(e.to_string()),
        }
    }
    Ok(out)
}
