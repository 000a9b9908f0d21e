use std::f64::consts::PI;

use switchdetect::asymmetric::phi_numeric;
use switchdetect::densities::{bstar_root, j_epsilon, j_epsilon_with, mixture_pdf, psi_population, Density, Shifted};
use switchdetect::estimate::estimate_consistent;
use switchdetect::harness::tables::{bivariate_mixture, BIVARIATE_COV};
use switchdetect::multivariate::regression::{coefficient_trace, ols, RegressionData};
use switchdetect::simgen::{generate_stream, Design, Scenario, Switching};
use switchdetect::{Density1D, MixtureSpec};

fn normal(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn mix(x: f64, eps: f64, h: f64) -> f64 {
    (1.0 - eps) * normal(x, 0.0, 1.0) + eps * normal(x, h, 1.0)
}

/// Composite Simpson rule with `2n` panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let m = 2 * n;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i.is_multiple_of(2) { 2.0 } else { 4.0 };
    }
    s * h / 3.0
}

fn spec(eps: f64, h: f64) -> MixtureSpec {
    MixtureSpec::binary(Density1D::standard_normal(), eps, h).unwrap()
}

#[test]
fn mixture_pdf_matches_closed_form_and_histogram() {
    let s = spec(0.1, 2.0);
    for i in -60..=80 {
        let x = i as f64 * 0.1;
        assert!((mixture_pdf(&s, x) - mix(x, 0.1, 2.0)).abs() < 1e-15);
    }
    let n = 1_000_000;
    let draws = generate_stream(&Scenario::MeanMixture { spec: s }, n, 7, 0).unwrap().into_sample().unwrap();
    let (lo, w, bins) = (-4.0, 0.25, 40);
    let mut counts = vec![0usize; bins];
    for &x in draws.values() {
        let k = ((x - lo) / w).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        let a = lo + k as f64 * w;
        let p = simpson(|x| mix(x, 0.1, 2.0), a, a + w, 50);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let freq = c as f64 / n as f64;
        assert!((freq - p).abs() <= 4.5 * se + 1e-6, "bin {a}: {freq} vs {p}");
    }
}

#[test]
fn population_psi_matches_simpson() {
    for (eps, h) in [(0.1, 2.0), (0.25, 3.0), (0.05, -1.5)] {
        let s = spec(eps, h);
        let m = eps * h;
        for b in [0.1, 0.5, 1.0, 2.0, 3.5, 6.0] {
            let want = simpson(|x| (x - m) * mix(x, eps, h), m - b, m + b, 4000);
            let got = psi_population(&s, b).unwrap();
            assert!((got - want).abs() < 1e-10, "eps={eps} h={h} b={b}: {got} vs {want}");
        }
    }
}

#[test]
fn j_matches_simpson_and_is_stable_under_refinement() {
    let f0 = Density1D::standard_normal();
    for (eps, h) in [(0.1, 2.0), (0.3, 1.0), (0.05, 4.0)] {
        let f1 = Shifted { inner: &f0, shift: h };
        let want = simpson(
            |x| (normal(x, 0.0, 1.0) - normal(x, h, 1.0)).powi(2) / mix(x, eps, h),
            -12.0,
            12.0 + h,
            20_000,
        );
        let got = j_epsilon(&f0, &f1, eps).unwrap();
        assert!((got - want).abs() < 1e-8 * want, "eps={eps} h={h}: {got} vs {want}");
        let finer = j_epsilon_with(&f0, &f1, eps, 5e-11).unwrap();
        assert!((finer - got).abs() < 1e-9 * got);
    }
}

#[test]
fn j_grows_with_the_shift() {
    let f0 = Density1D::standard_normal();
    let mut last = 0.0;
    for k in 1..=16 {
        let h = 0.25 * k as f64;
        let j = j_epsilon(&f0, &Shifted { inner: &f0, shift: h }, 0.1).unwrap();
        assert!(j > last, "h={h}");
        last = j;
    }
}

#[test]
fn bstar_balances_the_density_and_maximises_psi() {
    for (eps, h) in [(0.1, 2.0), (0.25, 3.0)] {
        let s = spec(eps, h);
        let m = eps * h;
        let r = bstar_root(&s, 1e-6, 50.0).unwrap();
        assert!(r.residual.abs() <= 1e-10);
        assert!((mix(m - r.root, eps, h) - mix(m + r.root, eps, h)).abs() <= 1e-10);
        let at = psi_population(&s, r.root).unwrap().abs();
        for d in [-0.05, -0.01, 0.01, 0.05] {
            assert!(psi_population(&s, r.root + d).unwrap().abs() <= at + 1e-12);
        }
    }
}

#[test]
fn consistent_estimator_recovers_population_parameters() {
    for (eps, h) in [(0.1, 2.0), (0.25, 3.0), (0.05, 4.0)] {
        let s = spec(eps, h);
        let b = bstar_root(&s, 1e-6, 50.0).unwrap().root;
        let e = estimate_consistent(s.mean(), b, s.base(), Some(eps)).unwrap();
        assert!(e.residual.abs() <= 1e-8);
        assert!((e.eps_hat - eps).abs() < 1e-6, "{} vs {eps}", e.eps_hat);
        assert!((e.h_hat - h).abs() < 1e-4, "{} vs {h}", e.h_hat);
    }
}

struct CentredChiSquare1;

impl Density for CentredChiSquare1 {
    fn pdf(&self, y: f64) -> f64 {
        let x = y + 1.0;
        if x <= 0.0 {
            0.0
        } else {
            (-0.5 * x).exp() / (2.0 * PI * x).sqrt()
        }
    }

    fn support(&self) -> (f64, f64) {
        (-1.0, 80.0)
    }
}

/// For `Z² − 1` the zero-moment condition reduces to `a e^{-a} = c e^{-c}`
/// with `a = 1 − φ`, `c = 1 + b`.
#[test]
fn numeric_phi_solves_the_moment_condition() {
    let g = |a: f64| a * (-a).exp();
    for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let target = g(1.0 + b);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let want = 1.0 - 0.5 * (lo + hi);
        let got = phi_numeric(&CentredChiSquare1, b).unwrap();
        assert!((got - want).abs() < 1e-6, "b={b}: {got} vs {want}");
    }
}

/// Gaussian elimination with partial pivoting on the normal equations.
fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][k] += r[i] * yi;
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            for j in c..=k {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][k] - s) / a[i][i];
    }
    x
}

#[test]
fn ols_agrees_with_normal_equations() {
    let n = 200;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            vec![1.0, t, (7.0 * t).sin()]
        })
        .collect();
    let sc = Scenario::SwitchingRegression {
        beta0: vec![0.5, -1.0, 2.0],
        beta1: vec![0.5, -1.0, 2.0],
        eps: 0.0,
        noise_sigma: 0.3,
        design: Design::UserMatrix { rows: rows.clone() },
        switching: Switching::PerObservation,
    };
    let rd = generate_stream(&sc, n, 3, 0).unwrap().into_regression().unwrap();
    let y: Vec<f64> = rd.y().iter().copied().collect();
    let beta = ols(&rd).unwrap();
    let want = normal_equations(&rows, &y);
    for (b, w) in beta.iter().zip(&want) {
        assert!((b - w).abs() < 1e-9, "{b} vs {w}");
    }
    for j in 0..3 {
        let dot: f64 = rows
            .iter()
            .zip(&y)
            .map(|(r, yi)| r[j] * (yi - r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>()))
            .sum();
        assert!(dot.abs() < 1e-8, "column {j}: {dot}");
    }
}

#[test]
fn sliding_window_trace_tracks_constant_coefficients() {
    let y: Vec<f64> = (1..=120).map(|i| 2.0 + 0.5 * i as f64).collect();
    let rd = RegressionData::linear_trend(y).unwrap();
    let t = coefficient_trace(&rd, 20).unwrap();
    assert_eq!(t.len(), 101);
    assert!(t.coefficient(0).iter().all(|c| (c - 2.0).abs() < 1e-8));
    assert!(t.coefficient(1).iter().all(|c| (c - 0.5).abs() < 1e-10));
}

#[test]
fn generated_draws_pass_a_kolmogorov_smirnov_test() {
    let (eps, h) = (0.2, 2.5);
    let n = 20_000;
    let s = generate_stream(&Scenario::MeanMixture { spec: spec(eps, h) }, n, 11, 0).unwrap().into_sample().unwrap();
    let mut v = s.into_values();
    v.sort_by(f64::total_cmp);
    // CDF on a fine grid, accumulated panel by panel.
    let (lo, hi, m) = (-9.0, 12.0, 21_000);
    let step = (hi - lo) / m as f64;
    let mut cdf = vec![0.0; m + 1];
    for i in 0..m {
        let a = lo + i as f64 * step;
        cdf[i + 1] = cdf[i] + simpson(|x| mix(x, eps, h), a, a + step, 2);
    }
    let at = |x: f64| {
        let k = (((x - lo) / step).floor() as usize).min(m - 1);
        let a = lo + k as f64 * step;
        cdf[k] + simpson(|t| mix(t, eps, h), a, x, 2)
    };
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = at(x);
            f64::max(((i + 1) as f64 / n as f64 - f).abs(), (f - i as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.63 / (n as f64).sqrt(), "D = {d}");
}

#[test]
fn ar1_noise_has_the_requested_lag_one_correlation() {
    let rho = 0.6;
    let sc = Scenario::Ar1Mixture { rho, spec: MixtureSpec::homogeneous(Density1D::standard_normal()) };
    let v = generate_stream(&sc, 200_000, 5, 0).unwrap().into_sample().unwrap().into_values();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    let cov = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (v.len() - 1) as f64;
    assert!((var - 1.0).abs() < 0.02, "variance {var}");
    assert!((cov / var - rho).abs() < 0.01, "lag-1 correlation {}", cov / var);
}

#[test]
fn bivariate_draws_have_the_requested_covariance() {
    let sc = bivariate_mixture(0.0, None).scenario;
    let vs = generate_stream(&sc, 200_000, 9, 0).unwrap().into_vector().unwrap();
    let m = vs.mean();
    let n = vs.len() as f64;
    for (i, row) in BIVARIATE_COV.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            let got = vs.rows().map(|r| (r[i] - m[i]) * (r[j] - m[j])).sum::<f64>() / (n - 1.0);
            assert!((got - want).abs() <= 0.05 * want.abs(), "cov[{i}][{j}] = {got} vs {want}");
        }
    }
}

#[test]
fn sample_moments_match_the_mixtures() {
    let check = |sc: Scenario, mean: f64, var: f64| {
        let n = 400_000;
        let v = generate_stream(&sc, n, 13, 0).unwrap().into_sample().unwrap().into_values();
        let m = v.iter().sum::<f64>() / n as f64;
        let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - mean).abs() <= 3.0 * (var / n as f64).sqrt(), "mean {m} vs {mean}");
        assert!((s2 - var).abs() <= 0.02 * var, "variance {s2} vs {var}");
    };
    let (eps, h) = (0.1, 2.0);
    check(Scenario::MeanMixture { spec: spec(eps, h) }, eps * h, 1.0 + eps * (1.0 - eps) * h * h);
    check(
        Scenario::VarianceMixture { mu: 1.0, sigma: 1.0, lambda: 3.0, eps: 0.05 },
        1.0,
        0.95 + 0.05 * 9.0,
    );
    let three = MixtureSpec::new(
        Density1D::gaussian(1.0, 1.0).unwrap(),
        vec![
            switchdetect::Component { weight: 0.3, shift: 2.0 },
            switchdetect::Component { weight: 0.15, shift: 6.0 },
        ],
    )
    .unwrap();
    let mean = 0.55 * 1.0 + 0.3 * 3.0 + 0.15 * 7.0;
    let second = 0.55 * 1.0 + 0.3 * 9.0 + 0.15 * 49.0 + 1.0;
    check(Scenario::MultiClass { spec: three }, mean, second - mean * mean);
}
