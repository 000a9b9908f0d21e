mod report;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use switchdetect::densities::{bstar_root, j_epsilon, psi_population, Density, Shifted};
use switchdetect::harness::tables::{self, reproduce_table, ReproduceOptions};
use switchdetect::harness::{calibrate, derive_seed, CalibrationStore, Experiment, Statistic};
use switchdetect::multiclass::{peel, DEFAULT_MIN_SIZE};
use switchdetect::multivariate::regression::{default_window, detect_switching_regression, TraceMode};
use switchdetect::simgen::{generate_stream, Data};
use switchdetect::{
    detect, detect_asymmetric, detect_multivariate, detect_variance_contamination, estimate::estimate, io, BandGrid, Density1D, Error,
    MixtureSpec,
};
use thiserror::Error;

use report::{Format, Report};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Calibration(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Calibration(_) => 4,
        }
    }

    fn config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    fn data(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => CliError::Config(e.to_string()),
            Error::Parse { .. } | Error::Io(_) | Error::Degenerate(_) | Error::SingularDesign { .. } => {
                CliError::Data(e.to_string())
            }
            Error::MissingCalibration { .. } | Error::FingerprintMismatch { .. } => CliError::Calibration(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Retrospective detection of contamination and random switching.
#[derive(Debug, Parser)]
#[command(name = "switchdetect", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Symmetric-band detection on a univariate sample.
    Detect(DetectArgs),
    /// Variance-contamination detection on squared residuals, or a general
    /// asymmetric band when `--f0` is given.
    DetectVar(VarArgs),
    /// Norm-statistic detection on a vector sample.
    DetectMv(MvArgs),
    /// Per-coefficient detection for a switching regression.
    DetectReg(RegArgs),
    /// Iterative peeling into classes.
    Peel(PeelArgs),
    /// Detection followed by estimation of the weight and shift.
    Estimate(EstimateArgs),
    /// Calibrate thresholds under the null and optionally store them.
    Calibrate(CalibrateArgs),
    /// Recompute one of the reference simulation tables.
    Reproduce(ReproduceArgs),
    /// Write a simulated data set in the format the detectors read.
    Generate(GenerateArgs),
    /// Population quantities computed by quadrature.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Spacing {
    Geometric,
    Linear,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Smallest band half-width.
    #[arg(long, default_value_t = 0.04, allow_hyphen_values = true)]
    kappa: f64,
    /// Largest band half-width.
    #[arg(long = "B", default_value_t = 50.0, allow_hyphen_values = true)]
    b_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 512)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Geometric)]
    spacing: Spacing,
}

impl GridArgs {
    fn grid(&self) -> CliResult<BandGrid> {
        match self.spacing {
            Spacing::Geometric => BandGrid::geometric(self.kappa, self.b_max, self.points),
            Spacing::Linear => BandGrid::linear(self.kappa, self.b_max, self.points),
        }
        .map_err(CliError::config)
    }
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Explicit threshold; overrides any calibration lookup.
    #[arg(long = "C", allow_hyphen_values = true)]
    c: Option<f64>,
    /// Quantile level to look up in the calibration store.
    #[arg(long)]
    p: Option<f64>,
    /// Calibration store (JSON lines).
    #[arg(long, env = "SWITCHDETECT_STORE")]
    store: Option<PathBuf>,
    /// Preset name or JSON experiment file identifying the calibration.
    #[arg(long)]
    experiment: Option<String>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// One value per line.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Include the full profile in the report.
    #[arg(long)]
    profile: bool,
}

#[derive(Debug, Args)]
struct VarArgs {
    #[command(flatten)]
    detect: DetectArgs,
    /// Density of the centred observations (`x − mean`): `normal[:MEAN:VARIANCE]`
    /// or a two-column file. Switches to the numerically solved asymmetric band.
    #[arg(long)]
    f0: Option<String>,
}

#[derive(Debug, Args)]
struct MvArgs {
    /// One row per line, columns separated by whitespace or commas.
    #[arg(long)]
    input: PathBuf,
    /// Zero-based coordinates to analyse (default: all).
    #[arg(long, value_delimiter = ',')]
    coords: Option<Vec<usize>>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    profile: bool,
}

#[derive(Debug, Args)]
struct RegArgs {
    /// Response in the first column, predictors after it.
    #[arg(long)]
    input: PathBuf,
    /// Sliding-window width (default max(20, 5k)).
    #[arg(long, conflicts_with = "partial_residual")]
    window: Option<usize>,
    /// Use partial-residual traces instead of sliding windows.
    #[arg(long)]
    partial_residual: bool,
    /// One threshold per coefficient; overrides calibration lookup.
    #[arg(long = "C", value_delimiter = ',', allow_hyphen_values = true)]
    c: Option<Vec<f64>>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, env = "SWITCHDETECT_STORE")]
    store: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PeelArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_SIZE)]
    min_size: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Base density: `normal`, `normal:MEAN:VARIANCE`, or a two-column file.
    #[arg(long)]
    f0: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Preset name or JSON experiment file.
    #[arg(long, default_value = "normal")]
    experiment: String,
    /// Sample sizes (repeat or comma-separate).
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Quantile levels.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.95, 0.99])]
    p: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "SWITCHDETECT_STORE")]
    store: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    table: u8,
    /// Trials per cell (default: the reference counts).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = ReproduceOptions::default().seed)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Preset name or JSON experiment file.
    #[arg(long, default_value = "mixture")]
    experiment: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stream index within the seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    /// Population curve at band half-width `b`.
    Psi,
    /// Root of f(m - b) = f(m + b).
    Bstar,
    /// Chi-square type distance between the base and shifted densities.
    J,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(value_enum)]
    kind: OracleKind,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    h: f64,
    #[arg(long)]
    b: Option<f64>,
    /// Upper end of the b* search interval.
    #[arg(long = "B", default_value_t = 50.0)]
    b_max: f64,
    #[arg(long)]
    f0: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

const PRESETS: [&str; 8] = [
    "normal",
    "mixture",
    "variance",
    "multiclass",
    "bivariate",
    "bivariate-full",
    "regression",
    "regression-partial",
];

/// Resolves a preset or JSON file. Presets take the grid from the flags;
/// files carry their own.
fn experiment(name: &str, grid: Option<BandGrid>) -> CliResult<Experiment> {
    let window = TraceMode::SlidingWindow { window: default_window(2) };
    let mut exp = match name {
        "normal" => tables::mean_mixture(0.0, 0.0),
        "mixture" => tables::mean_mixture(0.1, 2.0),
        "variance" => tables::variance_mixture(3.0, 0.05),
        "multiclass" => tables::multiclass_mixture(),
        "bivariate" => tables::bivariate_mixture(0.2, Some(vec![1])),
        "bivariate-full" => tables::bivariate_mixture(0.2, None),
        "regression" => tables::switching_regression([1.0, 2.0], 0.05, 1, window),
        "regression-partial" => tables::switching_regression([1.0, 2.0], 0.05, 1, TraceMode::PartialResidual),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!(
                    "unknown experiment {path:?} (presets: {}; or a JSON file): {e}",
                    PRESETS.join(", ")
                ))
            })?;
            return serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")));
        }
    };
    if let Some(g) = grid {
        exp.grid = g;
    }
    Ok(exp)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load<T>(path: &Path, read: impl FnOnce(BufReader<File>) -> switchdetect::Result<T>) -> CliResult<T> {
    read(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

struct Threshold {
    c: f64,
    source: String,
}

fn threshold(
    args: &ThresholdArgs,
    default_experiment: &str,
    statistic: Option<Statistic>,
    grid: &BandGrid,
    n: usize,
) -> CliResult<Threshold> {
    if let Some(c) = args.c {
        if !(c > 0.0) || !c.is_finite() {
            return Err(CliError::Config(format!("threshold must be positive, got {c}")));
        }
        return Ok(Threshold { c, source: "explicit".into() });
    }
    let Some(p) = args.p else {
        return Err(CliError::Config("give a threshold with --C, or --p with a calibration store".into()));
    };
    let Some(store) = &args.store else {
        return Err(CliError::Calibration(format!(
            "no calibration store for p = {p}; pass --store or set SWITCHDETECT_STORE"
        )));
    };
    let mut exp = experiment(args.experiment.as_deref().unwrap_or(default_experiment), Some(grid.clone()))?;
    if let Some(s) = statistic {
        exp.statistic = s;
    }
    let fp = exp.fingerprint();
    let t = CalibrationStore::new(store).threshold(&fp, n, p)?;
    let source = if t.exact {
        format!("store, n = {n}, p = {p}")
    } else {
        format!("store, log-interpolated to n = {n}, p = {p}")
    };
    Ok(Threshold { c: t.c, source })
}

fn parse_f0(spec: &str) -> CliResult<Density1D> {
    if spec == "normal" {
        return Ok(Density1D::standard_normal());
    }
    if let Some(rest) = spec.strip_prefix("normal:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
        return match nums.as_deref() {
            Ok([m, v]) => Density1D::gaussian(*m, *v).map_err(CliError::config),
            _ => Err(CliError::Config(format!("expected normal:MEAN:VARIANCE, got {spec:?}"))),
        };
    }
    load(Path::new(spec), io::read_tabulated_density).map(Density1D::Tabulated)
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Detect(a) => {
            let grid = a.grid.grid()?;
            let s = load(&a.input, io::read_sample)?;
            let t = threshold(&a.threshold, "normal", Some(Statistic::Mean), &grid, s.len())?;
            let r = detect(&s, &grid, t.c)?;
            Ok(Report::detection(&r, &t.source, a.profile).render(a.output.format))
        }
        Command::DetectVar(VarArgs { detect: a, f0 }) => {
            let grid = a.grid.grid()?;
            let s = load(&a.input, io::read_sample)?;
            let t = threshold(&a.threshold, "variance", Some(Statistic::Variance), &grid, s.len())?;
            if let Some(spec) = f0 {
                let f0 = parse_f0(&spec)?;
                let r = detect_asymmetric(&s, &grid, &f0, t.c)?;
                return Ok(Report::detection(&r, &t.source, a.profile).render(a.output.format));
            }
            let r = detect_variance_contamination(&s, &grid, t.c).map_err(CliError::data)?;
            let mut rep = Report::detection(&r.result, &t.source, a.profile);
            rep.push("mu_hat", r.mu_hat);
            rep.push("eps_hat", r.eps_hat);
            Ok(rep.render(a.output.format))
        }
        Command::DetectMv(a) => {
            let grid = a.grid.grid()?;
            let vs = load(&a.input, io::read_vector_sample)?;
            let vs = match &a.coords {
                None => vs,
                Some(c) => {
                    if c.is_empty() || c.iter().any(|&j| j >= vs.dim()) {
                        return Err(CliError::Config("coordinate out of range".into()));
                    }
                    let rows = vs.rows().map(|r| c.iter().map(|&j| r[j]).collect()).collect();
                    switchdetect::VectorSample::from_rows(rows).map_err(CliError::data)?
                }
            };
            let stat = Statistic::Vector { coords: a.coords.clone() };
            let t = threshold(&a.threshold, "bivariate-full", Some(stat), &grid, vs.len())?;
            let r = detect_multivariate(&vs, &grid, t.c)?;
            Ok(Report::vector_detection(&r, &t.source, a.profile).render(a.output.format))
        }
        Command::DetectReg(a) => {
            let grid = a.grid.grid()?;
            let rd = load(&a.input, io::read_regression)?;
            let mode = if a.partial_residual {
                TraceMode::PartialResidual
            } else {
                TraceMode::SlidingWindow { window: a.window.unwrap_or_else(|| default_window(rd.k())) }
            };
            let trace_len = match mode {
                TraceMode::SlidingWindow { window } => rd.n().saturating_sub(window) + 1,
                TraceMode::PartialResidual => rd.n(),
            };
            let (cs, sources): (Vec<f64>, Vec<String>) = match &a.c {
                Some(cs) => {
                    if cs.len() != rd.k() {
                        return Err(CliError::Config(format!("{} thresholds for {} coefficients", cs.len(), rd.k())));
                    }
                    if let Some(c) = cs.iter().find(|c| !(**c > 0.0)) {
                        return Err(CliError::Config(format!("threshold must be positive, got {c}")));
                    }
                    (cs.clone(), vec!["explicit".into(); cs.len()])
                }
                None => {
                    let targs = ThresholdArgs { c: None, p: a.p, store: a.store.clone(), experiment: a.experiment.clone() };
                    (0..rd.k())
                        .map(|j| {
                            let stat = Statistic::Regression { coefficient: j, mode };
                            threshold(&targs, "regression", Some(stat), &grid, trace_len).map(|t| (t.c, t.source))
                        })
                        .collect::<CliResult<Vec<_>>>()?
                        .into_iter()
                        .unzip()
                }
            };
            let per = detect_switching_regression(&rd, &grid, &cs, mode)?;
            Ok(report::regression(&per, &sources).render(a.output.format))
        }
        Command::Peel(a) => {
            let grid = a.grid.grid()?;
            let s = load(&a.input, io::read_sample)?;
            let (threshold_fn, source): (Box<dyn Fn(usize) -> f64>, String) = match a.threshold.c {
                Some(c) => {
                    let t = threshold(&a.threshold, "multiclass", None, &grid, s.len())?;
                    (Box::new(move |_| c), t.source)
                }
                None => {
                    // Validates the flags and reports a missing store first.
                    threshold(&a.threshold, "multiclass", Some(Statistic::Mean), &grid, s.len())?;
                    let mut exp = experiment(a.threshold.experiment.as_deref().unwrap_or("multiclass"), Some(grid.clone()))?;
                    exp.statistic = Statistic::Mean;
                    let p = a.threshold.p.expect("checked above");
                    let store = CalibrationStore::new(a.threshold.store.clone().expect("checked above"));
                    let curve = store.curve(&exp.fingerprint(), p)?;
                    (Box::new(move |n| curve.threshold(n)), format!("store curve, p = {p}"))
                }
            };
            let r = peel(&s, &grid, &*threshold_fn, a.max_iter, a.min_size)?;
            Ok(report::peeling(&r, &source).render(a.output.format))
        }
        Command::Estimate(a) => {
            let grid = a.grid.grid()?;
            let s = load(&a.input, io::read_sample)?;
            let f0 = a.f0.as_deref().map(parse_f0).transpose()?;
            let t = threshold(&a.threshold, "normal", Some(Statistic::Mean), &grid, s.len())?;
            let det = detect(&s, &grid, t.c)?;
            let est = if det.decision.rejects() { Some(estimate(&det, f0.as_ref())?) } else { None };
            Ok(report::estimation(&det, est.as_ref(), &t.source).render(a.output.format))
        }
        Command::Calibrate(a) => {
            let grid = a.grid.grid()?;
            let exp = experiment(&a.experiment, Some(grid))?;
            let fp = exp.fingerprint();
            let store = a.store.as_ref().map(CalibrationStore::new);
            let mut entries = Vec::new();
            for &n in &a.n {
                let seed = derive_seed(a.seed, &format!("calibrate:{fp}"), n);
                for e in calibrate(&exp, n, a.trials, &a.p, seed)? {
                    let added = match &store {
                        Some(st) => Some(st.append(&e).map_err(|err| match err {
                            Error::ConflictingCalibration { .. } => CliError::Calibration(err.to_string()),
                            other => CliError::from(other),
                        })?),
                        None => None,
                    };
                    entries.push((e, added));
                }
            }
            Ok(report::calibration(&fp, &entries).render(a.output.format))
        }
        Command::Reproduce(a) => {
            let r = reproduce_table(a.table, ReproduceOptions { trials: a.trials, seed: a.seed })?;
            match a.output.format {
                Format::Human => Ok(tables::render_human(&r)),
                Format::Csv => Ok(tables::render_delimited(&r, b',')?),
                Format::Tsv => Ok(tables::render_delimited(&r, b'\t')?),
                Format::Json => Ok(report::json(&r)),
            }
        }
        Command::Generate(a) => {
            let exp = experiment(&a.experiment, None)?;
            let g = generate_stream(&exp.scenario, a.n, a.seed, a.stream)?;
            let mut buf = Vec::new();
            match &g.data {
                Data::Univariate(s) => io::write_sample(&mut buf, s),
                Data::Vector(v) => io::write_vector_sample(&mut buf, v),
                Data::Regression(r) => io::write_regression(&mut buf, r),
            }?;
            let text = String::from_utf8(buf).expect("numbers are ASCII");
            match a.output {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Oracle(a) => {
            let f0 = a.f0.as_deref().map(parse_f0).transpose()?.unwrap_or_else(Density1D::standard_normal);
            let spec = MixtureSpec::binary(f0.clone(), a.eps, a.h).map_err(CliError::config)?;
            let mut rep = Report::new("oracle");
            rep.push("eps", a.eps);
            rep.push("h", a.h);
            match a.kind {
                OracleKind::Psi => {
                    let b = a.b.ok_or_else(|| CliError::Config("psi needs --b".into()))?;
                    rep.push("b", b);
                    rep.push("psi", psi_population(&spec, b)?);
                }
                OracleKind::Bstar => {
                    let r = bstar_root(&spec, 1e-6, a.b_max)?;
                    rep.push("b_star", r.root);
                    rep.push("residual", r.residual);
                    rep.push_bool("unique", r.unique);
                }
                OracleKind::J => {
                    let f1 = Shifted { inner: &f0, shift: a.h };
                    let f0_ref: &dyn Density = &f0;
                    rep.push("j", j_epsilon(f0_ref, &f1, a.eps)?);
                }
            }
            Ok(rep.render(a.output.format))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
