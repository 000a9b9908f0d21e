//! Bracketing root finders.

use crate::error::{Error, Result};

/// Bisection on a bracket `[lo, hi]` where `f(lo)` and `f(hi)` have opposite
/// signs. Stops when `|f(mid)| <= ftol` or the bracket collapses to adjacent
/// floats.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::NoRoot { lo, hi });
    }
    let mut best = if flo.abs() < fhi.abs() { lo } else { hi };
    let mut best_abs = flo.abs().min(fhi.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best_abs {
            best = mid;
            best_abs = fm.abs();
        }
        if fm.abs() <= ftol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Every sub-interval of `points` on which `f` strictly changes sign.
pub fn sign_changes<F: Fn(f64) -> f64>(f: &F, points: &[f64]) -> Vec<(f64, f64)> {
    let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (&x, &v) in points.iter().zip(values.iter()) {
        if v == 0.0 || !v.is_finite() {
            continue;
        }
        if let Some((lx, lv)) = last {
            if lv.signum() != v.signum() {
                out.push((lx, x));
            }
        }
        last = Some((x, v));
    }
    out
}

/// Roots found by scanning `points` for sign changes and bisecting each.
pub fn all_roots<F: Fn(f64) -> f64>(f: F, points: &[f64], ftol: f64) -> Result<Vec<f64>> {
    sign_changes(&f, points)
        .into_iter()
        .map(|(a, b)| bisect(&f, a, b, ftol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoRoot { .. })
        ));
    }

    #[test]
    fn scan_reports_each_crossing() {
        let pts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let roots = all_roots(|x| x.sin(), &pts[1..], 1e-12).unwrap();
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - std::f64::consts::PI).abs() < 1e-10);
    }
}
