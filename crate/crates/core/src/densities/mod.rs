//! Density evaluation and the population-level oracles built on quadrature.
//!
//! Everything here is a pure function of its inputs. The estimators use these
//! values directly (the root `b*`, the normalizing density `f0`), and the test
//! suites use them as ground truth for Monte Carlo checks.

pub mod quadrature;
pub mod roots;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
pub use quadrature::{integrate, integrate_with, DEFAULT_TOLERANCE};

/// Number of standard deviations kept on each side when a Gaussian is
/// integrated over a finite window. Tail mass beyond is below 1e-15.
pub const GAUSSIAN_TRUNCATION_SIGMAS: f64 = 8.0;

/// Floor on the mixture density in the χ²-type distance; points where the
/// mixture is smaller contribute nothing.
pub const J_DENSITY_FLOOR: f64 = 1e-300;

/// A univariate density known pointwise.
pub trait Density: Send + Sync {
    fn pdf(&self, x: f64) -> f64;

    /// Finite window carrying all but a negligible amount of mass.
    fn support(&self) -> (f64, f64);
}

impl<D: Density + ?Sized> Density for &D {
    fn pdf(&self, x: f64) -> f64 {
        (**self).pdf(x)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
}

/// Piecewise-linear density read from `(x, f(x))` pairs, zero outside the
/// tabulated range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("tabulated density needs at least two points"));
        }
        let (xs, fs): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if xs.iter().chain(fs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated density contains non-finite values"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated density abscissae must be strictly increasing"));
        }
        if fs.iter().any(|&f| f < 0.0) {
            return Err(Error::invalid("tabulated density values must be non-negative"));
        }
        Ok(Self { xs, fs })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.fs.iter().copied())
    }

    /// Total mass under the interpolant (exact for piecewise-linear data).
    pub fn mass(&self) -> f64 {
        crate::summation::sum(
            self.xs
                .windows(2)
                .zip(self.fs.windows(2))
                .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1])),
        )
    }

    /// Copy rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::invalid("tabulated density has zero mass"));
        }
        Ok(Self {
            xs: self.xs.clone(),
            fs: self.fs.iter().map(|f| f / m).collect(),
        })
    }

    fn segment(&self, x: f64) -> Option<usize> {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return None;
        }
        let i = self.xs.partition_point(|&v| v <= x);
        Some(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    pub fn mean(&self) -> f64 {
        // ∫ x f(x) dx on each linear segment, closed form.
        let m = self.mass();
        let s = crate::summation::sum(self.xs.windows(2).zip(self.fs.windows(2)).map(|(x, f)| {
            let h = x[1] - x[0];
            h * (f[0] * (2.0 * x[0] + x[1]) + f[1] * (x[0] + 2.0 * x[1])) / 6.0
        }));
        s / m
    }

    /// Inverse CDF of the (normalized) interpolant.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = self.mass();
        let target = u.clamp(0.0, 1.0) * total;
        let mut acc = 0.0;
        for (x, f) in self.xs.windows(2).zip(self.fs.windows(2)) {
            let h = x[1] - x[0];
            let seg = 0.5 * h * (f[0] + f[1]);
            if acc + seg >= target && seg > 0.0 {
                // Solve f0 t + (f1 - f0) t² / (2h) = target - acc for t in [0, h].
                let need = target - acc;
                let a = (f[1] - f[0]) / (2.0 * h);
                let t = if a.abs() < 1e-15 {
                    need / f[0]
                } else {
                    let disc = (f[0] * f[0] + 4.0 * a * need).max(0.0);
                    (-f[0] + disc.sqrt()) / (2.0 * a)
                };
                return x[0] + t.clamp(0.0, h);
            }
            acc += seg;
        }
        *self.xs.last().unwrap()
    }
}

impl Density for TabulatedDensity {
    fn pdf(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(i) => {
                let (x0, x1) = (self.xs[i], self.xs[i + 1]);
                let t = (x - x0) / (x1 - x0);
                self.fs[i] + t * (self.fs[i + 1] - self.fs[i])
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }
}

/// The base density `f0` of ordinary observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density1D {
    Gaussian { mean: f64, variance: f64 },
    Tabulated(TabulatedDensity),
}

impl Density1D {
    pub fn standard_normal() -> Self {
        Density1D::Gaussian {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::invalid(format!(
                "Gaussian needs finite mean and positive variance, got N({mean}, {variance})"
            )));
        }
        Ok(Density1D::Gaussian { mean, variance })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Density1D::Gaussian { mean, variance } => Self::gaussian(*mean, *variance).map(|_| ()),
            Density1D::Tabulated(t) => TabulatedDensity::new(t.points().collect()).map(|_| ()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Density1D::Gaussian { mean, .. } => *mean,
            Density1D::Tabulated(t) => t.mean(),
        }
    }
}

impl Density for Density1D {
    fn pdf(&self, x: f64) -> f64 {
        match self {
            Density1D::Gaussian { mean, variance } => {
                let z = x - mean;
                (-0.5 * z * z / variance).exp() / (2.0 * PI * variance).sqrt()
            }
            Density1D::Tabulated(t) => t.pdf(x),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Density1D::Gaussian { mean, variance } => {
                let w = GAUSSIAN_TRUNCATION_SIGMAS * variance.sqrt();
                (mean - w, mean + w)
            }
            Density1D::Tabulated(t) => t.support(),
        }
    }
}

/// One abnormal component: weight `ε` and location shift `h` applied to `f0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub shift: f64,
}

/// `(1 - Σεᵢ) f0(x) + Σ εᵢ f0(x - hᵢ)`, components sorted by decreasing weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    base: Density1D,
    components: Vec<Component>,
}

impl MixtureSpec {
    pub fn new(base: Density1D, mut components: Vec<Component>) -> Result<Self> {
        base.validate()?;
        if components
            .iter()
            .any(|c| !(c.weight >= 0.0 && c.weight < 1.0) || !c.shift.is_finite())
        {
            return Err(Error::invalid("component weights must lie in [0, 1) with finite shifts"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total < 1.0) {
            return Err(Error::invalid(format!(
                "component weights must sum below 1, got {total}"
            )));
        }
        components.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        Ok(Self { base, components })
    }

    /// The homogeneous model (no components).
    pub fn homogeneous(base: Density1D) -> Self {
        Self {
            base,
            components: Vec::new(),
        }
    }

    /// Binary contamination `(1-ε) f0(x) + ε f0(x - h)`.
    pub fn binary(base: Density1D, eps: f64, shift: f64) -> Result<Self> {
        Self::new(base, vec![Component { weight: eps, shift }])
    }

    pub fn base(&self) -> &Density1D {
        &self.base
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.total_weight() == 0.0
    }

    /// Same base with every weight set to zero.
    pub fn null(&self) -> Self {
        Self::homogeneous(self.base.clone())
    }

    /// Mixture mean, `E f0 + Σ εᵢ hᵢ`.
    pub fn mean(&self) -> f64 {
        self.base.mean() + self.components.iter().map(|c| c.weight * c.shift).sum::<f64>()
    }
}

impl Density for MixtureSpec {
    fn pdf(&self, x: f64) -> f64 {
        mixture_pdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.support();
        self.components
            .iter()
            .filter(|c| c.weight > 0.0)
            .fold((lo, hi), |(l, h), c| (l.min(lo + c.shift), h.max(hi + c.shift)))
    }
}

pub fn mixture_pdf(spec: &MixtureSpec, x: f64) -> f64 {
    let f0 = &spec.base;
    let mut v = (1.0 - spec.total_weight()) * f0.pdf(x);
    for c in &spec.components {
        if c.weight > 0.0 {
            v += c.weight * f0.pdf(x - c.shift);
        }
    }
    v
}

fn clipped(lo: f64, hi: f64, support: (f64, f64)) -> Option<(f64, f64)> {
    let (a, b) = (lo.max(support.0), hi.min(support.1));
    (a < b).then_some((a, b))
}

/// Population curve `Ψ(b) = r(b) - m d(b)` where `m` is the mixture mean,
/// `r(b) = ∫_{m-b}^{m+b} x f(x) dx` and `d(b) = ∫_{m-b}^{m+b} f(x) dx`.
pub fn psi_population(spec: &MixtureSpec, b: f64) -> Result<f64> {
    psi_population_with(spec, b, 1e-11)
}

pub fn psi_population_with(spec: &MixtureSpec, b: f64, tol: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::invalid(format!("band half-width must be positive, got {b}")));
    }
    let m = spec.mean();
    let Some((lo, hi)) = clipped(m - b, m + b, spec.support()) else {
        return Ok(0.0);
    };
    // Integrating (x - m) f(x) directly keeps cancellation out of r - m d.
    integrate(|x| (x - m) * mixture_pdf(spec, x), lo, hi, tol)
}

/// Outcome of solving `f(m - b) = f(m + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BStar {
    pub root: f64,
    /// Residual `|f(m - b*) - f(m + b*)|`.
    pub residual: f64,
    /// False when more than one sign change was seen on the search interval.
    pub unique: bool,
}

pub const BSTAR_TOLERANCE: f64 = 1e-10;
const BSTAR_SCAN_POINTS: usize = 4096;

/// Smallest root of `g(b) = f(m - b) - f(m + b)` on `(lo, hi)`, where `m` is
/// the mixture mean. This is the population maximizer of `|Ψ(b)|`.
pub fn bstar_root(spec: &MixtureSpec, lo: f64, hi: f64) -> Result<BStar> {
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid(format!("b* search interval must satisfy 0 < lo < hi, got ({lo}, {hi})")));
    }
    let m = spec.mean();
    let g = |b: f64| mixture_pdf(spec, m - b) - mixture_pdf(spec, m + b);
    let ratio = (hi / lo).powf(1.0 / (BSTAR_SCAN_POINTS - 1) as f64);
    let points: Vec<f64> = (0..BSTAR_SCAN_POINTS)
        .map(|i| if i + 1 == BSTAR_SCAN_POINTS { hi } else { lo * ratio.powi(i as i32) })
        .collect();
    let brackets = roots::sign_changes(&g, &points);
    let Some(&(a, b)) = brackets.first() else {
        return Err(Error::NoRoot { lo, hi });
    };
    let root = roots::bisect(g, a, b, BSTAR_TOLERANCE)?;
    Ok(BStar {
        root,
        residual: g(root).abs(),
        unique: brackets.len() == 1,
    })
}

/// Generalized χ² distance `J(ε) = ∫ (f0 - f1)² / f_ε dx`, with
/// `f_ε = (1-ε) f0 + ε f1`.
pub fn j_epsilon(f0: &dyn Density, f1: &dyn Density, eps: f64) -> Result<f64> {
    j_epsilon_with(f0, f1, eps, 1e-10)
}

pub fn j_epsilon_with(f0: &dyn Density, f1: &dyn Density, eps: f64, tol: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    let (a0, b0) = f0.support();
    let (a1, b1) = f1.support();
    let integrand = |x: f64| {
        let p = f0.pdf(x);
        let q = f1.pdf(x);
        let mix = (1.0 - eps) * p + eps * q;
        if mix > J_DENSITY_FLOOR {
            (p - q) * (p - q) / mix
        } else {
            0.0
        }
    };
    integrate(integrand, a0.min(a1), b0.max(b1), tol)
}

/// Location-shifted view of a density, `x ↦ f(x - shift)`.
#[derive(Clone, Copy, Debug)]
pub struct Shifted<D> {
    pub inner: D,
    pub shift: f64,
}

impl<D: Density> Density for Shifted<D> {
    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x - self.shift)
    }
    fn support(&self) -> (f64, f64) {
        let (a, b) = self.inner.support();
        (a + self.shift, b + self.shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n01() -> Density1D {
        Density1D::standard_normal()
    }

    #[test]
    fn mixture_pdf_trivial_cases() {
        let h0 = MixtureSpec::homogeneous(n01());
        assert!((mixture_pdf(&h0, 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let zero_shift = MixtureSpec::binary(n01(), 0.5, 0.0).unwrap();
        assert!((mixture_pdf(&zero_shift, 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mixture_pdf_direct_formula() {
        let spec = MixtureSpec::binary(n01(), 0.1, 2.0).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let expected = 0.9 * phi(1.0) + 0.1 * phi(-1.0);
        assert!((mixture_pdf(&spec, 1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn mixture_spec_rejects_bad_weights() {
        assert!(MixtureSpec::binary(n01(), 1.0, 1.0).is_err());
        assert!(MixtureSpec::binary(n01(), -0.1, 1.0).is_err());
        assert!(MixtureSpec::new(
            n01(),
            vec![
                Component { weight: 0.6, shift: 1.0 },
                Component { weight: 0.5, shift: 2.0 }
            ]
        )
        .is_err());
    }

    #[test]
    fn components_sorted_by_weight() {
        let spec = MixtureSpec::new(
            n01(),
            vec![
                Component { weight: 0.15, shift: 7.0 },
                Component { weight: 0.3, shift: 3.0 },
            ],
        )
        .unwrap();
        assert_eq!(spec.components()[0].weight, 0.3);
    }

    #[test]
    fn mixture_normalizes() {
        let spec = MixtureSpec::binary(n01(), 0.25, 3.0).unwrap();
        let (lo, hi) = spec.support();
        let mass = integrate(|x| mixture_pdf(&spec, x), lo, hi, 1e-10).unwrap();
        assert!((mass - 1.0).abs() < 1e-5);
    }

    #[test]
    fn psi_population_vanishes_under_null() {
        let spec = MixtureSpec::homogeneous(n01());
        for b in [0.04, 0.5, 1.0, 3.0, 50.0] {
            assert!(psi_population(&spec, b).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn psi_population_full_mass_limit() {
        let spec = MixtureSpec::binary(n01(), 0.1, 2.0).unwrap();
        assert!(psi_population(&spec, 50.0).unwrap().abs() < 1e-4);
    }

    #[test]
    fn bstar_symmetric_case_has_no_root() {
        let spec = MixtureSpec::binary(n01(), 0.0, 2.0).unwrap();
        assert!(matches!(bstar_root(&spec, 1e-6, 50.0), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn bstar_residual_within_tolerance() {
        for (eps, h) in [(0.1, 2.0), (0.25, 3.0)] {
            let spec = MixtureSpec::binary(n01(), eps, h).unwrap();
            let r = bstar_root(&spec, 1e-6, 50.0).unwrap();
            let m = eps * h;
            let lhs = mixture_pdf(&spec, m - r.root);
            let rhs = mixture_pdf(&spec, m + r.root);
            assert!((lhs - rhs).abs() <= 1e-10, "eps={eps} h={h}");
            assert!(r.unique);
        }
    }

    #[test]
    fn j_epsilon_identical_densities() {
        assert_eq!(j_epsilon(&n01(), &n01(), 0.1).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_density_interpolates_and_normalizes() {
        let t = TabulatedDensity::new(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]).unwrap();
        assert_eq!(t.pdf(0.5), 1.0);
        assert_eq!(t.pdf(-1.0), 0.0);
        assert!((t.mass() - 2.0).abs() < 1e-15);
        let n = t.normalized().unwrap();
        assert!((n.mass() - 1.0).abs() < 1e-15);
        assert!((n.mean() - 1.0).abs() < 1e-15);
        assert!((n.quantile(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_density_rejects_unsorted() {
        assert!(TabulatedDensity::new(vec![(1.0, 0.1), (0.0, 0.1)]).is_err());
        assert!(TabulatedDensity::new(vec![(0.0, -0.1), (1.0, 0.1)]).is_err());
    }
}
