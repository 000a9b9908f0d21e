//! Reproduction of the ten reference simulation tables.
//!
//! Every cell recomputes its threshold by calibration under the matching
//! null, runs the contaminated scenario and compares with the reference
//! value under the stated tolerance.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_se, calibrate, derive_seed, run_power, CalibrationEntry, Experiment, Statistic};
use crate::densities::{Component, Density1D, MixtureSpec};
use crate::detect::BandGrid;
use crate::error::{Error, Result};
use crate::multiclass::{peel, ThresholdCurve, DEFAULT_MIN_SIZE};
use crate::multivariate::regression::{default_window, TraceMode};
use crate::simgen::{generate_stream, Design, Scenario, Switching};

/// Covariance of the bivariate Gaussian scenario.
pub const BIVARIATE_COV: [[f64; 2]; 2] = [[0.745, -0.07], [-0.07, 0.01]];

pub fn mean_mixture(eps: f64, h: f64) -> Experiment {
    Experiment::new(
        Scenario::MeanMixture {
            spec: MixtureSpec::binary(Density1D::standard_normal(), eps, h).expect("valid weights"),
        },
        Statistic::Mean,
        BandGrid::default(),
    )
}

pub fn variance_mixture(lambda: f64, eps: f64) -> Experiment {
    Experiment::new(
        Scenario::VarianceMixture { mu: 0.0, sigma: 1.0, lambda, eps },
        Statistic::Variance,
        BandGrid::default(),
    )
}

/// Base `N(1, 1)` with classes centred at 3 and 7.
pub fn multiclass_mixture() -> Experiment {
    let spec = MixtureSpec::new(
        Density1D::gaussian(1.0, 1.0).expect("valid base"),
        vec![
            Component { weight: 0.3, shift: 2.0 },
            Component { weight: 0.15, shift: 6.0 },
        ],
    )
    .expect("valid weights");
    Experiment::new(Scenario::MultiClass { spec }, Statistic::Mean, BandGrid::default())
}

/// Bivariate Gaussian with a mean shift of `(0, 0.25)` in the abnormal class.
pub fn bivariate_mixture(eps: f64, coords: Option<Vec<usize>>) -> Experiment {
    Experiment::new(
        Scenario::VectorMixture {
            mean0: vec![0.0, 0.0],
            mean1: vec![0.0, 0.25],
            cov: BIVARIATE_COV.iter().map(|r| r.to_vec()).collect(),
            eps,
        },
        Statistic::Vector { coords },
        BandGrid::default(),
    )
}

/// `yᵢ = c₁ + c₂ i + uᵢ` with `(c₁, c₂)` switching from `(1, 1)` to `beta1`.
pub fn switching_regression(beta1: [f64; 2], eps: f64, coefficient: usize, mode: TraceMode) -> Experiment {
    Experiment::new(
        Scenario::SwitchingRegression {
            beta0: vec![1.0, 1.0],
            beta1: beta1.to_vec(),
            eps,
            noise_sigma: 1.0,
            design: Design::LinearTrend,
            switching: Switching::PerObservation,
        },
        Statistic::Regression { coefficient, mode },
        BandGrid::default(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported for comparison only.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub quantity: String,
    pub n: usize,
    pub expected: f64,
    pub reproduced: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug)]
enum Tolerance {
    Relative(f64),
    /// `max(floor, 2·SE)` for a frequency.
    Frequency(f64),
    Absolute(f64),
    Info,
}

impl Cell {
    fn new(quantity: impl Into<String>, n: usize, expected: f64, reproduced: f64, tol: Tolerance, trials: usize) -> Self {
        let delta = (reproduced - expected).abs();
        let (tolerance, verdict) = match tol {
            Tolerance::Relative(r) => (r * expected.abs(), None),
            Tolerance::Frequency(floor) => (floor.max(2.0 * binomial_se(expected, trials)), None),
            Tolerance::Absolute(a) => (a, None),
            Tolerance::Info => (f64::NAN, Some(Verdict::Info)),
        };
        let verdict = verdict.unwrap_or(if delta <= tolerance { Verdict::Pass } else { Verdict::Fail });
        Self {
            quantity: quantity.into(),
            n,
            expected,
            reproduced,
            delta,
            tolerance,
            verdict,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub table: u8,
    pub title: String,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<Cell>,
    /// Extra diagnostics that have no reference counterpart.
    pub supplementary: Vec<Cell>,
}

impl TableReport {
    pub fn passed(&self) -> usize {
        self.cells.iter().filter(|c| c.verdict == Verdict::Pass).count()
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.verdict == Verdict::Fail).count()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReproduceOptions {
    /// Overrides the reference trial counts.
    pub trials: Option<usize>,
    pub seed: u64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self { trials: None, seed: 20_240_101 }
    }
}

/// Calibrations shared between cells of one reproduction.
struct Calibrations {
    seed: u64,
    trials: usize,
    cache: HashMap<(String, usize), Vec<CalibrationEntry>>,
}

const LEVELS: [f64; 2] = [0.95, 0.99];

impl Calibrations {
    fn new(seed: u64, trials: usize) -> Self {
        Self { seed, trials, cache: HashMap::new() }
    }

    fn entries(&mut self, exp: &Experiment, n: usize) -> Result<&[CalibrationEntry]> {
        let fp = exp.fingerprint();
        let key = (fp.clone(), n);
        if !self.cache.contains_key(&key) {
            let seed = derive_seed(self.seed, &format!("calibrate:{fp}"), n);
            let entries = calibrate(exp, n, self.trials, &LEVELS, seed)?;
            self.cache.insert(key.clone(), entries);
        }
        Ok(&self.cache[&key])
    }

    fn entry(&mut self, exp: &Experiment, n: usize, p: f64) -> Result<CalibrationEntry> {
        self.entries(exp, n)?
            .iter()
            .find(|e| e.p == p)
            .cloned()
            .ok_or_else(|| Error::MissingCalibration { fingerprint: exp.fingerprint(), p })
    }
}

fn quantile_table(
    table: u8,
    title: &str,
    exp: &Experiment,
    sizes: &[usize],
    reference: [&[f64]; 2],
    rel_tol: f64,
    trials: usize,
    seed: u64,
) -> Result<TableReport> {
    let mut cal = Calibrations::new(seed, trials);
    let mut cells = Vec::new();
    for (k, &p) in LEVELS.iter().enumerate() {
        for (&n, &expected) in sizes.iter().zip(reference[k]) {
            let c = cal.entry(exp, n, p)?.c;
            cells.push(Cell::new(format!("C p={p}"), n, expected, c, Tolerance::Relative(rel_tol), trials));
        }
    }
    Ok(TableReport { table, title: title.into(), trials, seed, cells, supplementary: Vec::new() })
}

struct PowerRow<'a> {
    label: &'a str,
    exp: Experiment,
    sizes: &'a [usize],
    expected_c: &'a [f64],
    expected_w2: &'a [f64],
    expected_eps: Option<&'a [f64]>,
    eps_tol: Tolerance,
    w2_tol: Tolerance,
}

fn power_rows(table: u8, title: &str, rows: Vec<PowerRow<'_>>, trials: usize, seed: u64) -> Result<TableReport> {
    let mut cal = Calibrations::new(seed, trials);
    let mut cells = Vec::new();
    let mut supplementary = Vec::new();
    for row in rows {
        for (k, &n) in row.sizes.iter().enumerate() {
            let entry = cal.entry(&row.exp, n, 0.95)?;
            let power_seed = derive_seed(seed, &format!("power:{table}:{}", row.label), n);
            let rep = run_power(&row.exp, n, &entry, trials, power_seed)?;
            let tag = |q: &str| if row.label.is_empty() { q.to_string() } else { format!("{q} {}", row.label) };
            supplementary.push(Cell::new(tag("C"), n, row.expected_c[k], entry.c, Tolerance::Info, trials));
            cells.push(Cell::new(tag("w2"), n, row.expected_w2[k], rep.accept_rate, row.w2_tol, trials));
            if let Some(eps) = row.expected_eps {
                cells.push(Cell::new(tag("eps_hat"), n, eps[k], rep.eps_nonpar.mean, row.eps_tol, trials));
            }
        }
    }
    Ok(TableReport { table, title: title.into(), trials, seed, cells, supplementary })
}

/// Sizes at which peeling thresholds are calibrated.
pub const PEEL_CURVE_SIZES: [usize; 12] = [20, 30, 50, 75, 100, 150, 200, 300, 500, 700, 1000, 1500];

/// Threshold curve for the multiclass null, used when peeling sub-samples.
pub fn multiclass_curve(trials: usize, seed: u64) -> Result<ThresholdCurve> {
    let exp = multiclass_mixture();
    let mut cal = Calibrations::new(seed, trials);
    let mut points = Vec::new();
    for &n in &PEEL_CURVE_SIZES {
        points.push((n, cal.entry(&exp, n, 0.95)?.c));
    }
    ThresholdCurve::new(points)
}

/// Fraction of samples whose peeling ends with fewer than three classes.
pub fn premature_stop_rate(curve: &ThresholdCurve, n: usize, trials: usize, seed: u64) -> Result<f64> {
    let exp = multiclass_mixture();
    let grid = exp.grid.clone();
    let short: Result<Vec<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = generate_stream(&exp.scenario, n, seed, t)?.into_sample()?;
            let r = peel(&s, &grid, &|m| curve.threshold(m), 10, DEFAULT_MIN_SIZE)?;
            Ok(r.class_count() < 3)
        })
        .collect();
    let short = short?;
    Ok(short.iter().filter(|&&b| b).count() as f64 / trials as f64)
}

pub fn reproduce_table(table: u8, opts: ReproduceOptions) -> Result<TableReport> {
    let seed = opts.seed;
    let trials = |default: usize| opts.trials.unwrap_or(default);
    let freq = Tolerance::Frequency(0.03);
    match table {
        1 => quantile_table(
            1,
            "Thresholds, N(0,1) samples",
            &mean_mixture(0.0, 0.0),
            &[50, 100, 300, 500, 800, 1000, 1200, 1500, 2000],
            [
                &[0.1681, 0.1213, 0.0710, 0.0534, 0.044, 0.0380, 0.037, 0.034, 0.029],
                &[0.1833, 0.1410, 0.0869, 0.0666, 0.050, 0.0471, 0.0390, 0.038, 0.035],
            ],
            0.15,
            trials(1000),
            seed,
        ),
        2 => power_rows(
            2,
            "Type-2 error, eps = 0.1",
            vec![
                PowerRow {
                    label: "h=2.0",
                    exp: mean_mixture(0.1, 2.0),
                    sizes: &[300, 500, 800, 1000],
                    expected_c: &[0.0710, 0.0534, 0.044, 0.038],
                    expected_w2: &[0.26, 0.15, 0.05, 0.02],
                    expected_eps: None,
                    eps_tol: Tolerance::Info,
                    w2_tol: Tolerance::Frequency(0.04),
                },
                PowerRow {
                    label: "h=1.5",
                    exp: mean_mixture(0.1, 1.5),
                    sizes: &[800, 1200, 2000, 3000],
                    expected_c: &[0.044, 0.037, 0.029, 0.022],
                    expected_w2: &[0.62, 0.42, 0.16, 0.03],
                    expected_eps: None,
                    eps_tol: Tolerance::Info,
                    w2_tol: Tolerance::Frequency(0.04),
                },
            ],
            trials(1000),
            seed,
        ),
        3 => quantile_table(
            3,
            "Thresholds, squared-residual statistic",
            &variance_mixture(3.0, 0.0),
            &[50, 100, 300, 500, 800, 1000, 1200, 1500, 2000],
            [
                &[0.3031, 0.2330, 0.1570, 0.1419, 0.1252, 0.1244, 0.1146, 0.1107, 0.1075],
                &[0.3699, 0.2862, 0.1947, 0.1543, 0.1436, 0.1331, 0.1269, 0.1190, 0.1157],
            ],
            0.15,
            trials(5000),
            seed,
        ),
        4 => power_rows(
            4,
            "Variance contamination, Lambda = 3, eps = 0.05",
            vec![PowerRow {
                label: "",
                exp: variance_mixture(3.0, 0.05),
                sizes: &[300, 500, 800, 1000],
                expected_c: &[0.1570, 0.1419, 0.1252, 0.1244],
                expected_w2: &[0.27, 0.15, 0.06, 0.04],
                expected_eps: Some(&[0.064, 0.056, 0.052, 0.05]),
                eps_tol: Tolerance::Absolute(0.015),
                w2_tol: freq,
            }],
            trials(5000),
            seed,
        ),
        5 => power_rows(
            5,
            "Variance contamination, Lambda = 5, eps = 0.01",
            vec![PowerRow {
                label: "",
                exp: variance_mixture(5.0, 0.01),
                sizes: &[1000, 1200, 1500, 2000, 3000],
                expected_c: &[0.1244, 0.1146, 0.1107, 0.1075, 0.1019],
                expected_w2: &[0.25, 0.20, 0.15, 0.10, 0.04],
                expected_eps: Some(&[0.0135, 0.013, 0.012, 0.011, 0.010]),
                eps_tol: Tolerance::Absolute(0.005),
                w2_tol: freq,
            }],
            trials(5000),
            seed,
        ),
        6 => {
            let sizes = [100, 200, 300, 500, 700, 1000, 1500];
            let expected = [0.116, 0.090, 0.070, 0.048, 0.036, 0.016, 0.010];
            let t = trials(1000);
            let mut report = power_rows(
                6,
                "Three classes, first-iteration type-2 error",
                vec![PowerRow {
                    label: "",
                    exp: multiclass_mixture(),
                    sizes: &sizes,
                    expected_c: &[f64::NAN; 7],
                    expected_w2: &expected,
                    expected_eps: None,
                    eps_tol: Tolerance::Info,
                    w2_tol: freq,
                }],
                t,
                seed,
            )?;
            let curve = multiclass_curve(t, seed)?;
            for (&n, &p) in sizes.iter().zip(&expected) {
                let rate = premature_stop_rate(&curve, n, t, derive_seed(seed, "peel:6", n))?;
                report
                    .supplementary
                    .push(Cell::new("P(fewer than 3 classes)", n, p, rate, Tolerance::Info, t));
            }
            Ok(report)
        }
        7 => quantile_table(
            7,
            "Thresholds, second coordinate of the bivariate model",
            &bivariate_mixture(0.0, Some(vec![1])),
            &[50, 100, 200, 300, 500, 700, 1000, 1500],
            [
                &[0.0066, 0.0059, 0.0041, 0.0037, 0.0027, 0.0024, 0.0019, 0.0016],
                &[0.014, 0.0083, 0.0057, 0.0045, 0.0037, 0.0036, 0.0024, 0.0020],
            ],
            0.20,
            trials(1000),
            seed,
        ),
        8 => power_rows(
            8,
            "Bivariate model, eps = 0.2, second coordinate",
            vec![PowerRow {
                label: "",
                exp: bivariate_mixture(0.2, Some(vec![1])),
                sizes: &[100, 200, 300, 500, 700, 1000, 1500],
                expected_c: &[0.0059, 0.0041, 0.0037, 0.0027, 0.0024, 0.0019, 0.0016],
                expected_w2: &[0.110, 0.019, 0.002, 0.0, 0.0, 0.0, 0.0],
                expected_eps: None,
                eps_tol: Tolerance::Info,
                w2_tol: freq,
            }],
            trials(1000),
            seed,
        ),
        9 | 10 => {
            let (beta1, eps, w2, eps_expected): ([f64; 2], f64, [f64; 4], [f64; 4]) = if table == 9 {
                ([1.0, 2.0], 0.05, [0.87, 0.59, 0.14, 0.004], [0.08, 0.059, 0.052, 0.05])
            } else {
                ([1.0, 1.5], 0.1, [0.83, 0.65, 0.13, 0.0], [0.15, 0.12, 0.102, 0.10])
            };
            let mode = TraceMode::SlidingWindow { window: default_window(2) };
            power_rows(
                table,
                &format!("Switching regression, eps = {eps}, slope trace"),
                vec![PowerRow {
                    label: "",
                    exp: switching_regression(beta1, eps, 1, mode),
                    sizes: &[300, 500, 800, 1000],
                    expected_c: &[0.07, 0.05, 0.04, 0.03],
                    expected_w2: &w2,
                    expected_eps: Some(&eps_expected),
                    eps_tol: Tolerance::Absolute(0.03),
                    w2_tol: freq,
                }],
                trials(1000),
                seed,
            )
        }
        _ => Err(Error::invalid(format!("table must be between 1 and 10, got {table}"))),
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.4}")
    }
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::Info => "info",
    }
}

fn rows_of(cells: &[Cell]) -> Vec<[String; 7]> {
    cells
        .iter()
        .map(|c| {
            [
                c.quantity.clone(),
                c.n.to_string(),
                fmt_num(c.expected),
                fmt_num(c.reproduced),
                fmt_num(c.delta),
                fmt_num(c.tolerance),
                verdict_str(c.verdict).to_string(),
            ]
        })
        .collect()
}

const HEADER: [&str; 7] = ["quantity", "N", "reference", "reproduced", "|delta|", "tolerance", "verdict"];

/// Aligned plain-text table.
pub fn render_human(report: &TableReport) -> String {
    let mut rows = vec![HEADER.map(String::from)];
    rows.extend(rows_of(&report.cells));
    let extra = rows_of(&report.supplementary);
    let widths: Vec<usize> = (0..7)
        .map(|j| rows.iter().chain(&extra).map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let line = |r: &[String; 7]| {
        r.iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = format!(
        "Table {}: {} ({} trials, seed {})\n",
        report.table, report.title, report.trials, report.seed
    );
    for r in &rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    if !extra.is_empty() {
        out.push_str("supplementary:\n");
        for r in &extra {
            out.push_str(&line(r));
            out.push('\n');
        }
    }
    out.push_str(&format!("{} pass, {} fail\n", report.passed(), report.failed()));
    out
}

/// Delimited rows with a header; supplementary cells carry `section = extra`.
pub fn render_delimited(report: &TableReport, delimiter: u8) -> Result<String> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["table", "section"];
    header.extend(HEADER);
    w.write_record(&header).map_err(io)?;
    for (section, cells) in [("main", &report.cells), ("extra", &report.supplementary)] {
        for r in rows_of(cells) {
            let mut rec = vec![report.table.to_string(), section.to_string()];
            rec.extend(r);
            w.write_record(&rec).map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
