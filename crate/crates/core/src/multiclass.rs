//! Iterative peeling for samples with several abnormal classes.
//!
//! The binary detector runs on the working sample. After a rejection the
//! ordinary part at `b*_N` becomes a class and the detector is re-run on the
//! abnormal remainder, until a run accepts homogeneity.

use serde::{Deserialize, Serialize};

use crate::detect::{detect, BandGrid, DetectionResult, Sample};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_SIZE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// The last working sample was judged homogeneous.
    Accepted,
    /// The iteration cap was reached with switches still detected.
    MaxIterations,
    /// The working sample shrank below the minimum size.
    TooSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeelingResult {
    /// Index sets in peel order; the last one is the terminal remainder.
    pub classes: Vec<Vec<usize>>,
    pub iterations: usize,
    pub per_iteration: Vec<DetectionResult>,
    pub stop: StopReason,
}

impl PeelingResult {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Class label for every original index.
    pub fn labels(&self, n: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n];
        for (c, idx) in self.classes.iter().enumerate() {
            for &i in idx {
                out[i] = c;
            }
        }
        out
    }
}

pub fn peel(
    s: &Sample,
    grid: &BandGrid,
    threshold_fn: &dyn Fn(usize) -> f64,
    max_iter: usize,
    min_size: usize,
) -> Result<PeelingResult> {
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if min_size < 2 {
        return Err(Error::invalid("min_size must be at least 2"));
    }
    let mut working: Vec<usize> = (0..s.len()).collect();
    let mut classes = Vec::new();
    let mut per_iteration = Vec::new();
    let stop = loop {
        if working.len() < min_size {
            break StopReason::TooSmall;
        }
        if per_iteration.len() == max_iter {
            break StopReason::MaxIterations;
        }
        let sub = Sample::new(s.select(&working))?;
        let det = detect(&sub, grid, threshold_fn(working.len()))?;
        let rejected = det.decision.rejects();
        if rejected {
            let split = &det.split_at_bstar;
            classes.push(split.ordinary_idx.iter().map(|&i| working[i]).collect());
            working = split.abnormal_idx.iter().map(|&i| working[i]).collect();
        }
        per_iteration.push(det);
        if !rejected {
            break StopReason::Accepted;
        }
    };
    classes.push(working);
    Ok(PeelingResult {
        classes,
        iterations: per_iteration.len(),
        per_iteration,
        stop,
    })
}

/// Threshold as a function of sample size, interpolated linearly in
/// `(ln n, ln C)` between calibrated points and extended along the end
/// segments outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    points: Vec<(usize, f64)>,
}

impl ThresholdCurve {
    pub fn new(mut points: Vec<(usize, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("threshold curve needs at least one point"));
        }
        if points.iter().any(|&(n, c)| n == 0 || !(c > 0.0)) {
            return Err(Error::invalid("threshold curve points need n > 0 and C > 0"));
        }
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("threshold curve has repeated sample sizes"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn threshold(&self, n: usize) -> f64 {
        if self.points.len() == 1 {
            return self.points[0].1;
        }
        let x = (n.max(1) as f64).ln();
        let k = self
            .points
            .partition_point(|p| p.0 < n)
            .clamp(1, self.points.len() - 1);
        let (n0, c0) = self.points[k - 1];
        let (n1, c1) = self.points[k];
        let (x0, x1) = ((n0 as f64).ln(), (n1 as f64).ln());
        let t = (x - x0) / (x1 - x0);
        (c0.ln() + t * (c1.ln() - c0.ln())).exp()
    }

    /// True when `n` lies outside the calibrated range or between points.
    pub fn is_interpolated(&self, n: usize) -> bool {
        !self.points.iter().any(|p| p.0 == n)
    }
}
