//! Switching regression, reduced to univariate detection on per-coefficient
//! traces of least-squares estimates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::detect::{detect, max_statistic, BandGrid, DetectionResult, Sample};
use crate::error::{Error, Result};

/// Relative size of the smallest admissible pivot of `R` in the QR factorization.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl RegressionData {
    /// `rows[i]` holds the predictors of observation `i`.
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        if k == 0 {
            return Err(Error::invalid("regression needs at least one predictor"));
        }
        if y.len() != n {
            return Err(Error::invalid(format!("{} responses for {n} predictor rows", y.len())));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("predictor rows have different lengths"));
        }
        if n <= k {
            return Err(Error::invalid(format!("need more observations than predictors, got N = {n}, k = {k}")));
        }
        if rows.iter().flatten().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("regression data contains non-finite values"));
        }
        let x = DMatrix::from_row_iterator(n, k, rows.into_iter().flatten());
        let data = Self { x, y: DVector::from_vec(y) };
        solve_least_squares(&data.x, &data.y)?;
        Ok(data)
    }

    /// Design with columns `1` and `i` for `i = 1..=n`.
    pub fn linear_trend(y: Vec<f64>) -> Result<Self> {
        let rows = (1..=y.len()).map(|i| vec![1.0, i as f64]).collect();
        Self::new(rows, y)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
}

fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * diag_max) || diag_max == 0.0 {
        return Err(Error::SingularDesign { columns: k });
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { columns: k })
}

/// Least-squares coefficients through a QR factorization.
pub fn ols(rd: &RegressionData) -> Result<Vec<f64>> {
    Ok(solve_least_squares(&rd.x, &rd.y)?.iter().copied().collect())
}

/// How per-observation coefficient sequences are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceMode {
    /// Least squares on each window of `window` consecutive observations.
    SlidingWindow { window: usize },
    /// Global fit plus each observation's residual attributed to one
    /// coefficient: `β̂ⱼ + eᵢ / xᵢⱼ`.
    PartialResidual,
}

impl TraceMode {
    pub fn default_for(k: usize) -> Self {
        TraceMode::SlidingWindow {
            window: default_window(k),
        }
    }
}

pub fn default_window(k: usize) -> usize {
    20.max(5 * k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTrace {
    pub mode: TraceMode,
    /// One `k`-vector per trace position.
    pub estimates: Vec<Vec<f64>>,
    /// Positions whose estimate was interpolated from neighbours.
    pub flagged: Vec<usize>,
}

impl CoefficientTrace {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// Sequence of coefficient `j` across positions.
    pub fn coefficient(&self, j: usize) -> Vec<f64> {
        self.estimates.iter().map(|b| b[j]).collect()
    }
}

fn fill_gaps(raw: Vec<Option<Vec<f64>>>, columns: usize) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let known: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_some()).collect();
    if known.is_empty() {
        return Err(Error::SingularDesign { columns });
    }
    let flagged: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_none()).collect();
    let mut out = Vec::with_capacity(raw.len());
    for (i, est) in raw.iter().enumerate() {
        if let Some(v) = est {
            out.push(v.clone());
            continue;
        }
        let after = known.partition_point(|&k| k < i);
        let v = match (after.checked_sub(1).map(|a| known[a]), known.get(after)) {
            (Some(l), Some(&r)) => {
                let t = (i - l) as f64 / (r - l) as f64;
                let (a, b) = (raw[l].as_ref().unwrap(), raw[r].as_ref().unwrap());
                a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
            }
            (Some(l), None) => raw[l].clone().unwrap(),
            (None, Some(&r)) => raw[r].clone().unwrap(),
            (None, None) => unreachable!(),
        };
        out.push(v);
    }
    Ok((out, flagged))
}

/// Sliding-window least squares; position `t` covers observations
/// `t..t+window`. Rank-deficient windows are flagged and interpolated.
pub fn coefficient_trace(rd: &RegressionData, window: usize) -> Result<CoefficientTrace> {
    let (n, k) = (rd.n(), rd.k());
    if window <= k || window > n {
        return Err(Error::invalid(format!("window must satisfy k < w ≤ N, got w = {window}")));
    }
    let raw: Vec<Option<Vec<f64>>> = (0..=n - window)
        .map(|t| {
            let x = rd.x.rows(t, window).into_owned();
            let y = rd.y.rows(t, window).into_owned();
            solve_least_squares(&x, &y).ok().map(|b| b.iter().copied().collect())
        })
        .collect();
    let (estimates, flagged) = fill_gaps(raw, k)?;
    Ok(CoefficientTrace {
        mode: TraceMode::SlidingWindow { window },
        estimates,
        flagged,
    })
}

/// Per-observation trace `β̂ⱼ + eᵢ/xᵢⱼ` around the global fit. Entries with
/// `xᵢⱼ = 0` are flagged and interpolated.
pub fn partial_residual_trace(rd: &RegressionData) -> Result<CoefficientTrace> {
    let beta = solve_least_squares(&rd.x, &rd.y)?;
    let resid = &rd.y - &rd.x * &beta;
    let k = rd.k();
    let mut flagged = Vec::new();
    let mut columns = Vec::with_capacity(k);
    for j in 0..k {
        let raw: Vec<Option<Vec<f64>>> = (0..rd.n())
            .map(|i| {
                let xij = rd.x[(i, j)];
                (xij.abs() > f64::EPSILON).then(|| vec![beta[j] + resid[i] / xij])
            })
            .collect();
        let (col, f) = fill_gaps(raw, k)?;
        flagged.extend(f);
        columns.push(col);
    }
    flagged.sort_unstable();
    flagged.dedup();
    let estimates = (0..rd.n()).map(|i| columns.iter().map(|c| c[i][0]).collect()).collect();
    Ok(CoefficientTrace {
        mode: TraceMode::PartialResidual,
        estimates,
        flagged,
    })
}

pub fn trace(rd: &RegressionData, mode: TraceMode) -> Result<CoefficientTrace> {
    match mode {
        TraceMode::SlidingWindow { window } => coefficient_trace(rd, window),
        TraceMode::PartialResidual => partial_residual_trace(rd),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDetection {
    pub coefficient: usize,
    pub result: DetectionResult,
    /// `N₂(b*)` over the trace length.
    pub eps_hat: f64,
}

/// Runs the univariate detector on each coefficient trace with its own
/// threshold.
pub fn detect_switching_regression(
    rd: &RegressionData,
    grid: &BandGrid,
    threshold_per_coef: &[f64],
    mode: TraceMode,
) -> Result<Vec<CoefficientDetection>> {
    if threshold_per_coef.len() != rd.k() {
        return Err(Error::invalid(format!(
            "{} thresholds given for {} coefficients",
            threshold_per_coef.len(),
            rd.k()
        )));
    }
    let tr = trace(rd, mode)?;
    (0..rd.k())
        .map(|j| {
            let s = Sample::new(tr.coefficient(j))?;
            let result = detect(&s, grid, threshold_per_coef[j])?;
            let eps_hat = result.split_at_bstar.n2 as f64 / s.len() as f64;
            Ok(CoefficientDetection {
                coefficient: j,
                result,
                eps_hat,
            })
        })
        .collect()
}

/// `max_b |Ψ_N(b)|` of each coefficient trace.
pub fn trace_max_statistics(rd: &RegressionData, grid: &BandGrid, mode: TraceMode) -> Result<Vec<f64>> {
    let tr = trace(rd, mode)?;
    Ok((0..rd.k()).map(|j| max_statistic(&tr.coefficient(j), grid)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_fits_are_exact() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let rd = RegressionData::new(rows, vec![2.0, 3.0, 5.0]).unwrap();
        let b = ols(&rd).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] - 3.0).abs() < 1e-12);

        let y: Vec<f64> = (1..=50).map(|i| 1.0 + 2.0 * i as f64).collect();
        let b = ols(&RegressionData::linear_trend(y).unwrap()).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-10 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(matches!(
            RegressionData::new(rows, vec![1.0, 2.0, 3.0]),
            Err(Error::SingularDesign { columns: 2 })
        ));
    }

    #[test]
    fn window_trace_without_noise_is_constant() {
        let y: Vec<f64> = (1..=100).map(|i| 1.0 + i as f64).collect();
        let rd = RegressionData::linear_trend(y).unwrap();
        let tr = coefficient_trace(&rd, 20).unwrap();
        assert_eq!(tr.len(), 81);
        for b in &tr.estimates {
            assert!((b[0] - 1.0).abs() < 1e-9 && (b[1] - 1.0).abs() < 1e-11, "{b:?}");
        }
    }

    #[test]
    fn singular_windows_are_interpolated() {
        // Second predictor is zero over the first stretch, so early windows are singular.
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, if i < 12 { 0.0 } else { i as f64 }]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 + 0.5 * r[1]).collect();
        let rd = RegressionData::new(rows, y).unwrap();
        let tr = coefficient_trace(&rd, 10).unwrap();
        assert!(tr.flagged.contains(&0));
        assert!((tr.estimates[0][1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn window_bounds_checked() {
        let rd = RegressionData::linear_trend((0..30).map(|i| i as f64).collect()).unwrap();
        assert!(coefficient_trace(&rd, 2).is_err());
        assert!(coefficient_trace(&rd, 31).is_err());
    }

    #[test]
    fn partial_residual_trace_reconstructs_response() {
        let y = vec![1.3, 2.9, 4.2, 4.8, 6.1, 7.2];
        let rd = RegressionData::linear_trend(y.clone()).unwrap();
        let b = ols(&rd).unwrap();
        let tr = partial_residual_trace(&rd).unwrap();
        for (i, est) in tr.estimates.iter().enumerate() {
            let t = (i + 1) as f64;
            assert!((est[0] + b[1] * t - y[i]).abs() < 1e-12);
            assert!((b[0] + est[1] * t - y[i]).abs() < 1e-12);
        }
    }
}
