//! Vector-valued observations: the split uses the Euclidean distance to the
//! mean vector and the decision uses the norm of the vector statistic.

pub mod regression;

use serde::{Deserialize, Serialize};

use crate::detect::{check_threshold, first_argmax, BandGrid, Decision, Sample};
use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

/// `N` rows of dimension `k`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorSample {
    dim: usize,
    data: Vec<f64>,
}

impl VectorSample {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if dim == 0 {
            return Err(Error::invalid("vector sample needs rows of positive dimension"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "row {} has dimension {}, expected {dim}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::from_flat(dim, rows.concat())
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::invalid("flat data length must be a multiple of the dimension"));
        }
        if data.len() / dim < 2 {
            return Err(Error::invalid("a vector sample needs at least 2 rows"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vector sample contains non-finite values"));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// One coordinate as a univariate sample.
    pub fn coordinate(&self, j: usize) -> Result<Sample> {
        if j >= self.dim {
            return Err(Error::invalid(format!("coordinate {j} out of range for dimension {}", self.dim)));
        }
        Sample::new(self.rows().map(|r| r[j]).collect())
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|j| self.rows().map(|r| r[j]).collect::<CompensatedSum>().value() / n)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorProfilePoint {
    pub b: f64,
    pub psi: Vec<f64>,
    pub norm: f64,
    pub n1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorSplit {
    pub b: f64,
    pub theta: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub ordinary_idx: Vec<usize>,
    pub abnormal_idx: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorDetectionResult {
    pub profile: Vec<VectorProfilePoint>,
    pub j_stat: f64,
    pub b_star_n: f64,
    pub decision: Decision,
    pub threshold_c: f64,
    pub split_at_bstar: VectorSplit,
}

fn distance(row: &[f64], theta: &[f64]) -> f64 {
    row.iter()
        .zip(theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

struct SortedRows {
    keys: Vec<f64>,
    /// `prefix[j][i]`: sum of centered coordinate `j` over the `i` closest rows.
    prefix: Vec<Vec<f64>>,
    n: usize,
}

impl SortedRows {
    fn new(vs: &VectorSample, theta: &[f64]) -> Self {
        let mut order: Vec<(f64, usize)> = vs.rows().enumerate().map(|(i, r)| (distance(r, theta), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let prefix = (0..vs.dim())
            .map(|j| crate::summation::prefix_sums(order.iter().map(|&(_, i)| vs.row(i)[j] - theta[j])))
            .collect();
        Self {
            keys: order.iter().map(|p| p.0).collect(),
            prefix,
            n: vs.len(),
        }
    }

    fn psi(&self, b: f64) -> (Vec<f64>, usize) {
        let n1 = self.keys.partition_point(|&k| k <= b);
        let n2 = self.n - n1;
        let nn = (self.n * self.n) as f64;
        let psi = self
            .prefix
            .iter()
            .map(|p| {
                let s1 = p[n1];
                let s2 = p[self.n] - s1;
                (n2 as f64 * s1 - n1 as f64 * s2) / nn
            })
            .collect();
        (psi, n1)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Ordinary iff `‖Yᵢ - θ_N‖ ≤ b`.
pub fn split_vector(vs: &VectorSample, b: f64) -> VectorSplit {
    let theta = vs.mean();
    let (ordinary_idx, abnormal_idx): (Vec<usize>, Vec<usize>) =
        (0..vs.len()).partition(|&i| distance(vs.row(i), &theta) <= b);
    VectorSplit {
        b,
        theta,
        n1: ordinary_idx.len(),
        n2: abnormal_idx.len(),
        ordinary_idx,
        abnormal_idx,
    }
}

pub fn vector_profile(vs: &VectorSample, grid: &BandGrid) -> Vec<VectorProfilePoint> {
    let sorted = SortedRows::new(vs, &vs.mean());
    grid.points()
        .iter()
        .map(|&b| {
            let (psi, n1) = sorted.psi(b);
            VectorProfilePoint { b, norm: norm(&psi), psi, n1 }
        })
        .collect()
}

pub fn vector_max_statistic(vs: &VectorSample, grid: &BandGrid) -> f64 {
    let sorted = SortedRows::new(vs, &vs.mean());
    grid.points().iter().map(|&b| norm(&sorted.psi(b).0)).fold(0.0, f64::max)
}

pub fn detect_multivariate(
    vs: &VectorSample,
    grid: &BandGrid,
    threshold_c: f64,
) -> Result<VectorDetectionResult> {
    check_threshold(threshold_c)?;
    let profile = vector_profile(vs, grid);
    let (k, j_stat) = first_argmax(profile.iter().map(|p| p.norm));
    let b_star_n = profile[k].b;
    Ok(VectorDetectionResult {
        j_stat,
        b_star_n,
        decision: Decision::from_statistic(j_stat, threshold_c),
        threshold_c,
        split_at_bstar: split_vector(vs, b_star_n),
        profile,
    })
}
