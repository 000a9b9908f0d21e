//! Monte Carlo engine: threshold calibration under the null, power runs,
//! a persistent calibration store and reproduction of the reference tables.

pub mod store;
pub mod tables;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymmetric::detect_variance_contamination;
use crate::densities::Density1D;
use crate::detect::{detect, BandGrid, Decision};
use crate::error::{Error, Result};
use crate::estimate::estimate_consistent;
use crate::multivariate::regression::{detect_switching_regression, TraceMode};
use crate::multivariate::{detect_multivariate, VectorSample};
use crate::simgen::{generate_stream, Scenario};

pub use store::{CalibrationEntry, CalibrationStore};

/// Smallest number of trials accepted by [`calibrate`].
pub const MIN_CALIBRATION_TRIALS: usize = 100;

/// Which detector turns a generated data set into `max_b |Ψ_N(b)|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Symmetric band around the sample mean.
    Mean,
    /// Squared residuals with the asymmetric band.
    Variance,
    /// Norm statistic on the listed coordinates of a vector sample (all
    /// coordinates when `None`).
    Vector { coords: Option<Vec<usize>> },
    /// One coefficient trace of a switching regression.
    Regression { coefficient: usize, mode: TraceMode },
}

/// A scenario, the statistic applied to it and the band grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub scenario: Scenario,
    pub statistic: Statistic,
    pub grid: BandGrid,
}

impl Experiment {
    pub fn new(scenario: Scenario, statistic: Statistic, grid: BandGrid) -> Self {
        Self { scenario, statistic, grid }
    }

    /// Hash of the null scenario, the statistic and the grid. Power runs at
    /// any contamination level share the fingerprint of their null.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            scenario: Scenario,
            statistic: &'a Statistic,
            grid: &'a BandGrid,
        }
        let key = Key {
            scenario: self.scenario.null(),
            statistic: &self.statistic,
            grid: &self.grid,
        };
        let json = serde_json::to_vec(&key).expect("experiment keys serialize");
        hex::encode(Sha256::digest(&json))
    }

    pub fn with_scenario(&self, scenario: Scenario) -> Self {
        Self { scenario, ..self.clone() }
    }
}

/// What one simulated data set produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub j_stat: f64,
    pub b_star: f64,
    /// `N₂(b*)/N` on the analysed sequence.
    pub eps_nonpar: f64,
    pub h_nonpar: Option<f64>,
    /// Root of the estimating equation, when the base density is known and
    /// the solver succeeds.
    pub eps_consistent: Option<f64>,
    pub h_consistent: Option<f64>,
}

fn project(vs: &VectorSample, coords: &Option<Vec<usize>>) -> Result<VectorSample> {
    match coords {
        None => Ok(vs.clone()),
        Some(c) => {
            if c.is_empty() || c.iter().any(|&j| j >= vs.dim()) {
                return Err(Error::invalid("coordinate selection out of range"));
            }
            let data = vs.rows().flat_map(|r| c.iter().map(move |&j| r[j])).collect();
            VectorSample::from_flat(c.len(), data)
        }
    }
}

fn binary_base(scenario: &Scenario) -> Option<&Density1D> {
    match scenario {
        Scenario::MeanMixture { spec } if spec.components().len() <= 1 => Some(spec.base()),
        _ => None,
    }
}

/// Statistic value and estimates for trial `stream` of `seed`.
pub fn run_trial(exp: &Experiment, n: usize, seed: u64, stream: u64) -> Result<TrialOutcome> {
    let data = generate_stream(&exp.scenario, n, seed, stream)?;
    // Any positive threshold works: only the profile and the split are used.
    const PLACEHOLDER_C: f64 = 1.0;
    let (j_stat, b_star, n2, len, theta) = match &exp.statistic {
        Statistic::Mean => {
            let s = data.into_sample()?;
            let r = detect(&s, &exp.grid, PLACEHOLDER_C)?;
            (r.j_stat, r.b_star_n, r.split_at_bstar.n2, s.len(), r.theta())
        }
        Statistic::Variance => {
            let s = data.into_sample()?;
            let r = detect_variance_contamination(&s, &exp.grid, PLACEHOLDER_C)?;
            (r.result.j_stat, r.result.b_star_n, r.result.split_at_bstar.n2, s.len(), f64::NAN)
        }
        Statistic::Vector { coords } => {
            let vs = project(&data.into_vector()?, coords)?;
            let r = detect_multivariate(&vs, &exp.grid, PLACEHOLDER_C)?;
            (r.j_stat, r.b_star_n, r.split_at_bstar.n2, vs.len(), f64::NAN)
        }
        Statistic::Regression { coefficient, mode } => {
            let rd = data.into_regression()?;
            if *coefficient >= rd.k() {
                return Err(Error::invalid(format!("coefficient {coefficient} out of range")));
            }
            let thresholds = vec![PLACEHOLDER_C; rd.k()];
            let mut per = detect_switching_regression(&rd, &exp.grid, &thresholds, *mode)?;
            let r = per.swap_remove(*coefficient).result;
            let len = r.n();
            (r.j_stat, r.b_star_n, r.split_at_bstar.n2, len, f64::NAN)
        }
    };
    let eps_nonpar = n2 as f64 / len as f64;
    let h_nonpar = (n2 > 0 && theta.is_finite()).then(|| theta / eps_nonpar);
    let consistent = match binary_base(&exp.scenario) {
        Some(f0) if theta.is_finite() => estimate_consistent(theta, b_star, f0, Some(eps_nonpar)).ok(),
        _ => None,
    };
    Ok(TrialOutcome {
        j_stat,
        b_star,
        eps_nonpar,
        h_nonpar,
        eps_consistent: consistent.map(|c| c.eps_hat),
        h_consistent: consistent.map(|c| c.h_hat),
    })
}

/// Seed for one purpose, derived from a master seed so that calibration and
/// power runs at different sizes never share random streams.
pub fn derive_seed(master: u64, purpose: &str, n: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    h.update((n as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// `trials` independent outcomes, in trial order regardless of scheduling.
pub fn run_trials(exp: &Experiment, n: usize, trials: usize, seed: u64) -> Result<Vec<TrialOutcome>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(exp, n, seed, t))
        .collect()
}

/// Order statistic at rank `⌈p·M⌉` (1-based) of the sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let rank = ((p * m as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(m) - 1]
}

/// Calibrated thresholds at sample size `n` for each `p`, from `trials`
/// samples of the null version of the experiment's scenario.
pub fn calibrate(exp: &Experiment, n: usize, trials: usize, p_list: &[f64], seed: u64) -> Result<Vec<CalibrationEntry>> {
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::invalid(format!(
            "calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {trials}"
        )));
    }
    if p_list.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::invalid("quantile levels must lie in (0, 1)"));
    }
    let null = exp.with_scenario(exp.scenario.null());
    let mut maxima: Vec<f64> = run_trials(&null, n, trials, seed)?.iter().map(|o| o.j_stat).collect();
    maxima.sort_by(f64::total_cmp);
    let fingerprint = exp.fingerprint();
    Ok(p_list
        .iter()
        .map(|&p| CalibrationEntry {
            fingerprint: fingerprint.clone(),
            n,
            p,
            c: quantile(&maxima, p),
            trials,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let count = v.len();
        if count == 0 {
            return Self { count, mean: f64::NAN, sd: f64::NAN };
        }
        let mean = crate::summation::sum(v.iter().copied()) / count as f64;
        let sd = if count > 1 {
            (crate::summation::sum(v.iter().map(|x| (x - mean) * (x - mean))) / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { count, mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub fingerprint: String,
    pub n: usize,
    pub trials: usize,
    pub threshold_c: f64,
    /// Fraction of trials with `J ≤ C`: the type-2 error rate under
    /// contamination, one minus the type-1 rate under the null.
    pub accept_rate: f64,
    /// Estimates over trials that rejected homogeneity.
    pub eps_nonpar: Summary,
    pub h_nonpar: Summary,
    pub eps_consistent: Summary,
    pub h_consistent: Summary,
    pub b_star: Summary,
    pub wall_time_secs: f64,
}

/// Binomial standard error of a frequency estimated from `trials` draws.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Accept rate and estimate summaries for the experiment's scenario at the
/// threshold of `entry`. Refuses thresholds calibrated for another experiment.
pub fn run_power(exp: &Experiment, n: usize, entry: &CalibrationEntry, trials: usize, seed: u64) -> Result<ExperimentReport> {
    let fingerprint = exp.fingerprint();
    if entry.fingerprint != fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: fingerprint,
            found: entry.fingerprint.clone(),
        });
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let start = Instant::now();
    let outcomes = run_trials(exp, n, trials, seed)?;
    Ok(summarize(&fingerprint, n, entry.c, &outcomes, start.elapsed().as_secs_f64()))
}

pub fn summarize(fingerprint: &str, n: usize, c: f64, outcomes: &[TrialOutcome], wall_time_secs: f64) -> ExperimentReport {
    let rejected: Vec<&TrialOutcome> = outcomes
        .iter()
        .filter(|o| Decision::from_statistic(o.j_stat, c).rejects())
        .collect();
    let accepts = outcomes.len() - rejected.len();
    ExperimentReport {
        fingerprint: fingerprint.to_string(),
        n,
        trials: outcomes.len(),
        threshold_c: c,
        accept_rate: accepts as f64 / outcomes.len() as f64,
        eps_nonpar: Summary::of(rejected.iter().map(|o| o.eps_nonpar)),
        h_nonpar: Summary::of(rejected.iter().filter_map(|o| o.h_nonpar)),
        eps_consistent: Summary::of(rejected.iter().filter_map(|o| o.eps_consistent)),
        h_consistent: Summary::of(rejected.iter().filter_map(|o| o.h_consistent)),
        b_star: Summary::of(rejected.iter().map(|o| o.b_star)),
        wall_time_secs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::MixtureSpec;

    fn normal_experiment() -> Experiment {
        Experiment::new(
            Scenario::MeanMixture { spec: MixtureSpec::homogeneous(Density1D::standard_normal()) },
            Statistic::Mean,
            BandGrid::default(),
        )
    }

    #[test]
    fn quantile_uses_ceiling_rank() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(quantile(&v, 0.95), 950.0);
        assert_eq!(quantile(&v, 0.99), 990.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
    }

    #[test]
    fn fingerprint_ignores_contamination() {
        let e = normal_experiment();
        let contaminated = e.with_scenario(Scenario::MeanMixture {
            spec: MixtureSpec::binary(Density1D::standard_normal(), 0.1, 2.0).unwrap(),
        });
        assert_eq!(e.fingerprint(), contaminated.fingerprint());
        let other = Experiment { statistic: Statistic::Variance, ..e.clone() };
        assert_ne!(e.fingerprint(), other.fingerprint());
    }

    #[test]
    fn constant_samples_calibrate_to_zero() {
        let e = Experiment::new(
            Scenario::MeanMixture { spec: MixtureSpec::homogeneous(Density1D::gaussian(5.0, 1e-300).unwrap()) },
            Statistic::Mean,
            BandGrid::default(),
        );
        let c = calibrate(&e, 50, 100, &[0.95], 1).unwrap();
        assert_eq!(c[0].c, 0.0);
    }

    #[test]
    fn calibration_needs_enough_trials() {
        assert!(calibrate(&normal_experiment(), 50, 99, &[0.95], 1).is_err());
    }

    #[test]
    fn mismatched_threshold_is_refused() {
        let e = normal_experiment();
        let entry = CalibrationEntry {
            fingerprint: "deadbeef".into(),
            n: 100,
            p: 0.95,
            c: 0.1,
            trials: 100,
            seed: 0,
            version: String::new(),
        };
        assert!(matches!(run_power(&e, 100, &entry, 10, 0), Err(Error::FingerprintMismatch { .. })));
    }

    #[test]
    fn trials_are_deterministic() {
        let e = normal_experiment();
        assert_eq!(run_trials(&e, 200, 16, 5).unwrap(), run_trials(&e, 200, 16, 5).unwrap());
    }
}
