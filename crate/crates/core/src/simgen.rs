//! Seeded synthetic data for every experiment scenario.
//!
//! Each draw comes from a ChaCha8 stream selected by `(seed, stream)`, so
//! trials can run in any order or in parallel and still reproduce bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::densities::{Density1D, MixtureSpec};
use crate::detect::Sample;
use crate::error::{Error, Result};
use crate::multivariate::regression::RegressionData;
use crate::multivariate::VectorSample;

pub type SimRng = ChaCha8Rng;

/// Independent generator for trial `stream` under master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switching {
    /// Each observation draws its own regime.
    #[default]
    PerObservation,
    /// One regime draw for the whole sample.
    PerSample,
    /// Each coefficient of each observation switches independently.
    PerCoefficient,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// Intercept and time index `1..=n`.
    #[default]
    LinearTrend,
    /// Fixed predictor rows, one per observation.
    UserMatrix { rows: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    MeanMixture { spec: MixtureSpec },
    /// `(1-ε) N(μ, σ²) + ε N(μ, Λ²)`.
    VarianceMixture { mu: f64, sigma: f64, lambda: f64, eps: f64 },
    MultiClass { spec: MixtureSpec },
    /// `(1-ε) N(mean0, cov) + ε N(mean1, cov)`.
    VectorMixture { mean0: Vec<f64>, mean1: Vec<f64>, cov: Vec<Vec<f64>>, eps: f64 },
    /// `yᵢ = xᵢ'β + uᵢ`, `β` switching from `beta0` to `beta1` with probability `eps`.
    SwitchingRegression {
        beta0: Vec<f64>,
        beta1: Vec<f64>,
        eps: f64,
        noise_sigma: f64,
        #[serde(default)]
        design: Design,
        #[serde(default)]
        switching: Switching,
    },
    /// Mixture whose Gaussian base noise follows a stationary AR(1) process.
    Ar1Mixture { rho: f64, spec: MixtureSpec },
}

impl Scenario {
    /// The same scenario with every contamination weight set to zero.
    pub fn null(&self) -> Scenario {
        let mut s = self.clone();
        match &mut s {
            Scenario::MeanMixture { spec } | Scenario::MultiClass { spec } | Scenario::Ar1Mixture { spec, .. } => {
                *spec = spec.null()
            }
            Scenario::VarianceMixture { eps, .. }
            | Scenario::VectorMixture { eps, .. }
            | Scenario::SwitchingRegression { eps, .. } => *eps = 0.0,
        }
        s
    }

    pub fn is_null(&self) -> bool {
        *self == self.null()
    }

    pub fn validate(&self) -> Result<()> {
        let eps_ok = |e: f64| (0.0..0.5).contains(&e);
        match self {
            Scenario::MeanMixture { spec } => spec.base().validate(),
            Scenario::MultiClass { spec } => {
                if !spec.is_homogeneous() && spec.components().len() < 2 {
                    return Err(Error::invalid("a multiclass scenario needs at least two abnormal components"));
                }
                spec.base().validate()
            }
            Scenario::VarianceMixture { mu, sigma, lambda, eps } => {
                if !(mu.is_finite() && *sigma > 0.0 && *lambda > 0.0 && eps_ok(*eps)) {
                    return Err(Error::invalid("variance mixture needs σ, Λ > 0 and ε in [0, 1/2)"));
                }
                Ok(())
            }
            Scenario::VectorMixture { mean0, mean1, cov, eps } => {
                if !eps_ok(*eps) {
                    return Err(Error::invalid("ε must lie in [0, 1/2)"));
                }
                let k = mean0.len();
                if k == 0 || mean1.len() != k || cov.len() != k || cov.iter().any(|r| r.len() != k) {
                    return Err(Error::invalid("means and covariance must share one positive dimension"));
                }
                cholesky(cov).map(|_| ())
            }
            Scenario::SwitchingRegression { beta0, beta1, eps, noise_sigma, design, .. } => {
                if !eps_ok(*eps) || !(*noise_sigma > 0.0) {
                    return Err(Error::invalid("switching regression needs ε in [0, 1/2) and σ > 0"));
                }
                if beta0.is_empty() || beta0.len() != beta1.len() {
                    return Err(Error::invalid("β vectors must have the same positive length"));
                }
                match design {
                    Design::LinearTrend if beta0.len() != 2 => {
                        Err(Error::invalid("the linear-trend design has exactly two coefficients"))
                    }
                    Design::UserMatrix { rows } if rows.iter().any(|r| r.len() != beta0.len()) => {
                        Err(Error::invalid("design rows must match the number of coefficients"))
                    }
                    _ => Ok(()),
                }
            }
            Scenario::Ar1Mixture { rho, spec } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::invalid(format!("|ρ| must be below 1, got {rho}")));
                }
                match spec.base() {
                    Density1D::Gaussian { .. } => Ok(()),
                    _ => Err(Error::invalid("the AR(1) generator needs a Gaussian base density")),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Univariate(Sample),
    Vector(VectorSample),
    Regression(RegressionData),
}

/// Generated data with the regime label of each observation (0 = ordinary).
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub data: Data,
    pub labels: Vec<usize>,
}

impl Generated {
    pub fn into_sample(self) -> Result<Sample> {
        match self.data {
            Data::Univariate(s) => Ok(s),
            _ => Err(Error::invalid("scenario does not produce a univariate sample")),
        }
    }

    pub fn into_vector(self) -> Result<VectorSample> {
        match self.data {
            Data::Vector(v) => Ok(v),
            _ => Err(Error::invalid("scenario does not produce a vector sample")),
        }
    }

    pub fn into_regression(self) -> Result<RegressionData> {
        match self.data {
            Data::Regression(r) => Ok(r),
            _ => Err(Error::invalid("scenario does not produce regression data")),
        }
    }
}

fn cholesky(cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = cov.len();
    let m = DMatrix::from_row_iterator(k, k, cov.iter().flatten().copied());
    if (&m - m.transpose()).abs().max() > 1e-12 {
        return Err(Error::invalid("covariance matrix must be symmetric"));
    }
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::invalid("covariance matrix must be positive definite"))
}

/// Index of the mixture component drawn from `u ∈ [0, 1)`; 0 is the base.
fn pick_component(spec: &MixtureSpec, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, c) in spec.components().iter().enumerate() {
        acc += c.weight;
        if u < acc {
            return i + 1;
        }
    }
    0
}

fn base_draw(base: &Density1D, rng: &mut SimRng) -> f64 {
    match base {
        Density1D::Gaussian { mean, variance } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + variance.sqrt() * z
        }
        Density1D::Tabulated(t) => t.quantile(rng.random::<f64>()),
    }
}

fn mixture_draws(spec: &MixtureSpec, n: usize, rng: &mut SimRng) -> (Vec<f64>, Vec<usize>) {
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = pick_component(spec, rng.random::<f64>());
        let shift = if label == 0 { 0.0 } else { spec.components()[label - 1].shift };
        values.push(base_draw(spec.base(), rng) + shift);
        labels.push(label);
    }
    (values, labels)
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Generated> {
    generate_stream(&cfg.scenario, cfg.n, cfg.seed, 0)
}

/// Draw `n` observations of `scenario` from stream `stream` of `seed`.
pub fn generate_stream(scenario: &Scenario, n: usize, seed: u64, stream: u64) -> Result<Generated> {
    scenario.validate()?;
    let mut rng = stream_rng(seed, stream);
    generate_with(scenario, n, &mut rng)
}

pub fn generate_with(scenario: &Scenario, n: usize, rng: &mut SimRng) -> Result<Generated> {
    match scenario {
        Scenario::MeanMixture { spec } | Scenario::MultiClass { spec } => {
            let (values, labels) = mixture_draws(spec, n, rng);
            Ok(Generated { data: Data::Univariate(Sample::new(values)?), labels })
        }
        Scenario::VarianceMixture { mu, sigma, lambda, eps } => {
            let mut values = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let abnormal = rng.random::<f64>() < *eps;
                let z: f64 = rng.sample(StandardNormal);
                values.push(mu + if abnormal { lambda } else { sigma } * z);
                labels.push(abnormal as usize);
            }
            Ok(Generated { data: Data::Univariate(Sample::new(values)?), labels })
        }
        Scenario::VectorMixture { mean0, mean1, cov, eps } => {
            let l = cholesky(cov)?;
            let k = mean0.len();
            let mut data = Vec::with_capacity(n * k);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let abnormal = rng.random::<f64>() < *eps;
                let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                let noise = &l * z;
                let mean = if abnormal { mean1 } else { mean0 };
                data.extend(mean.iter().zip(noise.iter()).map(|(m, e)| m + e));
                labels.push(abnormal as usize);
            }
            Ok(Generated { data: Data::Vector(VectorSample::from_flat(k, data)?), labels })
        }
        Scenario::SwitchingRegression { beta0, beta1, eps, noise_sigma, design, switching } => {
            let rows: Vec<Vec<f64>> = match design {
                Design::LinearTrend => (1..=n).map(|i| vec![1.0, i as f64]).collect(),
                Design::UserMatrix { rows } => {
                    if rows.len() != n {
                        return Err(Error::invalid(format!("design has {} rows, expected {n}", rows.len())));
                    }
                    rows.clone()
                }
            };
            let whole_sample = rng.random::<f64>() <= *eps;
            let mut y = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for row in &rows {
                let mut mean = 0.0;
                let mut label = 0;
                let obs_switch = rng.random::<f64>() <= *eps && *eps > 0.0;
                for (j, x) in row.iter().enumerate() {
                    let switched = match switching {
                        Switching::PerObservation => obs_switch,
                        Switching::PerSample => whole_sample && *eps > 0.0,
                        Switching::PerCoefficient => rng.random::<f64>() <= *eps && *eps > 0.0,
                    };
                    if switched {
                        label |= 1 << j.min(63);
                    }
                    mean += x * if switched { beta1[j] } else { beta0[j] };
                }
                let u: f64 = rng.sample(StandardNormal);
                y.push(mean + noise_sigma * u);
                labels.push(label);
            }
            Ok(Generated {
                data: Data::Regression(RegressionData::new(rows, y)?),
                labels,
            })
        }
        Scenario::Ar1Mixture { rho, spec } => {
            let Density1D::Gaussian { mean, variance } = spec.base() else {
                return Err(Error::invalid("the AR(1) generator needs a Gaussian base density"));
            };
            let sd = variance.sqrt();
            let innovation = (1.0 - rho * rho).sqrt();
            let mut z: f64 = rng.sample(StandardNormal);
            let mut values = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for t in 0..n {
                if t > 0 {
                    let eta: f64 = rng.sample(StandardNormal);
                    z = rho * z + innovation * eta;
                }
                let label = pick_component(spec, rng.random::<f64>());
                let shift = if label == 0 { 0.0 } else { spec.components()[label - 1].shift };
                values.push(mean + sd * z + shift);
                labels.push(label);
            }
            Ok(Generated { data: Data::Univariate(Sample::new(values)?), labels })
        }
    }
}
