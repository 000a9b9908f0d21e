use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge on [{lo}, {hi}] after {subdivisions} subdivisions (error estimate {estimate:e})")]
    QuadratureFailure {
        lo: f64,
        hi: f64,
        subdivisions: usize,
        estimate: f64,
    },

    #[error("no sign change of the target function on [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("estimation system has no solution on the bracket")]
    NoSolution,

    #[error("estimation system is ill-conditioned: |f0(θ+b) - f0(θ-b)| = {denominator:e}")]
    IllConditioned { denominator: f64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("singular design matrix (rank < {columns})")]
    SingularDesign { columns: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("calibration fingerprint mismatch: expected {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("no calibration entry for fingerprint {fingerprint}, p = {p}")]
    MissingCalibration { fingerprint: String, p: f64 },

    #[error("calibration entry already stored with a different threshold (fingerprint {fingerprint}, n = {n}, p = {p})")]
    ConflictingCalibration { fingerprint: String, n: usize, p: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
