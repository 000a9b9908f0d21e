//! Append-only calibration store: one JSON record per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiclass::ThresholdCurve;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub fingerprint: String,
    pub n: usize,
    pub p: f64,
    pub c: f64,
    pub trials: usize,
    pub seed: u64,
    pub version: String,
}

impl CalibrationEntry {
    fn same_key(&self, other: &CalibrationEntry) -> bool {
        self.fingerprint == other.fingerprint && self.n == other.n && self.p == other.p
    }
}

/// Threshold looked up from the store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredThreshold {
    pub c: f64,
    /// False when `c` was interpolated between stored sizes.
    pub exact: bool,
    pub entry: Option<CalibrationEntry>,
}

#[derive(Clone, Debug)]
pub struct CalibrationStore {
    path: PathBuf,
}

impl CalibrationStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records; a missing file is an empty store.
    pub fn load(&self) -> Result<Vec<CalibrationEntry>> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(entry);
        }
        Ok(out)
    }

    /// Appends `entry`. Returns `false` when an identical threshold is already
    /// stored; a different threshold under the same key is an error.
    pub fn append(&self, entry: &CalibrationEntry) -> Result<bool> {
        if let Some(old) = self.load()?.into_iter().find(|e| e.same_key(entry)) {
            if old.c == entry.c {
                return Ok(false);
            }
            return Err(Error::ConflictingCalibration {
                fingerprint: entry.fingerprint.clone(),
                n: entry.n,
                p: entry.p,
            });
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let line = serde_json::to_string(entry).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(f, "{line}")?;
        Ok(true)
    }

    pub fn lookup(&self, fingerprint: &str, n: usize, p: f64) -> Result<Option<CalibrationEntry>> {
        Ok(self
            .load()?
            .into_iter()
            .find(|e| e.fingerprint == fingerprint && e.n == n && e.p == p))
    }

    /// Exact entry when present, otherwise log-log interpolation across the
    /// sizes stored for this fingerprint and `p`.
    pub fn threshold(&self, fingerprint: &str, n: usize, p: f64) -> Result<StoredThreshold> {
        let entries: Vec<CalibrationEntry> = self
            .load()?
            .into_iter()
            .filter(|e| e.fingerprint == fingerprint && e.p == p)
            .collect();
        if let Some(e) = entries.iter().find(|e| e.n == n) {
            return Ok(StoredThreshold { c: e.c, exact: true, entry: Some(e.clone()) });
        }
        let points: Vec<(usize, f64)> = entries.iter().filter(|e| e.c > 0.0).map(|e| (e.n, e.c)).collect();
        if points.is_empty() {
            return Err(Error::MissingCalibration { fingerprint: fingerprint.to_string(), p });
        }
        let curve = ThresholdCurve::new(points)?;
        Ok(StoredThreshold { c: curve.threshold(n), exact: false, entry: None })
    }

    /// Curve over every size stored for this fingerprint and `p`.
    pub fn curve(&self, fingerprint: &str, p: f64) -> Result<ThresholdCurve> {
        let points: Vec<(usize, f64)> = self
            .load()?
            .into_iter()
            .filter(|e| e.fingerprint == fingerprint && e.p == p && e.c > 0.0)
            .map(|e| (e.n, e.c))
            .collect();
        if points.is_empty() {
            return Err(Error::MissingCalibration { fingerprint: fingerprint.to_string(), p });
        }
        ThresholdCurve::new(points)
    }
}
