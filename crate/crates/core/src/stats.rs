//! Streaming mean and covariance of embedding sets.
//!
//! [`StatsAccumulator`] keeps a running mean and co-moment matrix
//! `C = sum (x - mean)(x - mean)^T`, updated one vector at a time with the
//! centered (Welford) recurrence
//!
//! ```text
//! delta = x - mean_old
//! mean  = mean_old + delta / n
//! C     = C + (n - 1) / n * delta delta^T
//! ```
//!
//! and merged pairwise with the parallel form of the same update (Chan et al.).
//! Shards of a stream can be accumulated independently and merged.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;

/// Normalization of the co-moment matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    /// Divide by `n - 1`.
    #[default]
    Sample,
    /// Divide by `n`.
    Population,
}

impl FromStr for CovarianceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sample" => Ok(CovarianceMode::Sample),
            "population" => Ok(CovarianceMode::Population),
            other => Err(format!("unknown covariance mode {other:?} (sample|population)")),
        }
    }
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceMode::Sample => "sample",
            CovarianceMode::Population => "population",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    dim: usize,
    count: usize,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        StatsAccumulator {
            dim,
            count: 0,
            mean: DVector::zeros(dim),
            comoment: DMatrix::zeros(dim, dim),
        }
    }

    /// Accumulator over every row of `set`.
    pub fn from_set(set: &EmbeddingSet) -> Self {
        let mut acc = Self::new(set.dim());
        let cols = set.columns();
        for col in cols.column_iter() {
            acc.update(col.clone_owned());
        }
        acc
    }

    /// Like [`from_set`](Self::from_set), but splits the rows into `shards`
    /// contiguous blocks accumulated in parallel and merged in block order.
    pub fn from_set_sharded(set: &EmbeddingSet, shards: usize) -> Self {
        let n = set.len();
        let shards = shards.clamp(1, n.max(1));
        let block = n.div_ceil(shards);
        let cols = set.columns();
        let parts: Vec<StatsAccumulator> = (0..shards)
            .into_par_iter()
            .map(|s| {
                let mut acc = Self::new(set.dim());
                for i in (s * block)..((s + 1) * block).min(n) {
                    acc.update(cols.column(i).clone_owned());
                }
                acc
            })
            .collect();
        parts.into_iter().fold(Self::new(set.dim()), |mut acc, part| {
            acc.merge_unchecked(&part);
            acc
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn comoment(&self) -> &DMatrix<f64> {
        &self.comoment
    }

    /// Adds one vector to the stream.
    pub fn accumulate(&mut self, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: self.count });
        }
        self.update(DVector::from_column_slice(vector));
        Ok(())
    }

    fn update(&mut self, x: DVector<f64>) {
        self.count += 1;
        let n = self.count as f64;
        let delta = x - &self.mean;
        self.mean.axpy(1.0 / n, &delta, 1.0);
        self.comoment.ger((n - 1.0) / n, &delta, &delta, 1.0);
    }

    /// Folds `other` into `self`, as if its vectors had been accumulated here.
    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        self.merge_unchecked(other);
        Ok(())
    }

    fn merge_unchecked(&mut self, other: &StatsAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        self.mean.axpy(nb / n, &delta, 1.0);
        self.comoment += &other.comoment;
        self.comoment.ger(na * nb / n, &delta, &delta, 1.0);
        self.count += other.count;
    }

    /// Mean and covariance of everything accumulated so far. The covariance
    /// is symmetrized as `(C + C^T) / 2`.
    pub fn finalize(&self, mode: CovarianceMode) -> Result<GaussianStats> {
        let required = match mode {
            CovarianceMode::Sample => 2,
            CovarianceMode::Population => 1,
        };
        if self.count < required {
            return Err(Error::InsufficientSamples {
                required,
                count: self.count,
            });
        }
        let denom = match mode {
            CovarianceMode::Sample => (self.count - 1) as f64,
            CovarianceMode::Population => self.count as f64,
        };
        let mut cov = (&self.comoment + self.comoment.transpose()) / (2.0 * denom);
        // rank-one updates keep the diagonal >= 0 up to rounding
        for i in 0..self.dim {
            cov[(i, i)] = cov[(i, i)].max(0.0);
        }
        Ok(GaussianStats {
            encoder_id: String::new(),
            dim: self.dim,
            count: self.count,
            mean: self.mean.clone(),
            cov,
        })
    }
}

/// The Gaussian fit `N(mean, cov)` of one embedding set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StatsJson", into = "StatsJson")]
pub struct GaussianStats {
    pub encoder_id: String,
    pub dim: usize,
    pub count: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    /// Builds stats from explicit moments. `cov` must be symmetric to within
    /// `1e-12` relative Frobenius norm (it is then symmetrized exactly),
    /// finite, with a non-negative diagonal.
    pub fn new(encoder_id: impl Into<String>, mean: DVector<f64>, cov: DMatrix<f64>, count: usize) -> Result<Self> {
        let dim = mean.len();
        if cov.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: cov.nrows(),
            });
        }
        if let Some(row) = (0..dim).find(|&r| !mean[r].is_finite() || cov.row(r).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { row });
        }
        let norm = cov.norm();
        let asym = (&cov - cov.transpose()).norm();
        if norm > 0.0 && asym > 1e-12 * norm {
            return Err(Error::NotSymmetric(asym / norm));
        }
        if cov.diagonal().iter().any(|&v| v < 0.0) {
            return Err(Error::NotPsd);
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianStats {
            encoder_id: encoder_id.into(),
            dim,
            count,
            mean,
            cov,
        })
    }

    /// Fits `N(mean, cov)` to all rows of `set`.
    pub fn from_embeddings(set: &EmbeddingSet, mode: CovarianceMode) -> Result<Self> {
        let mut stats = StatsAccumulator::from_set(set).finalize(mode)?;
        stats.encoder_id = set.encoder_id().to_string();
        Ok(stats)
    }

    pub fn with_encoder_id(mut self, encoder_id: impl Into<String>) -> Self {
        self.encoder_id = encoder_id.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `{encoder_id, dim, count, mean, cov}` on the wire.
#[derive(Serialize, Deserialize)]
struct StatsJson {
    encoder_id: String,
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl From<GaussianStats> for StatsJson {
    fn from(s: GaussianStats) -> Self {
        StatsJson {
            encoder_id: s.encoder_id,
            dim: s.dim,
            count: s.count,
            mean: s.mean.iter().copied().collect(),
            cov: s.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<StatsJson> for GaussianStats {
    type Error = Error;

    fn try_from(j: StatsJson) -> Result<Self> {
        if j.mean.len() != j.dim || j.cov.len() != j.dim {
            return Err(Error::DimensionMismatch {
                expected: j.dim,
                found: j.mean.len(),
            });
        }
        if let Some(row) = j.cov.iter().find(|r| r.len() != j.dim) {
            return Err(Error::DimensionMismatch {
                expected: j.dim,
                found: row.len(),
            });
        }
        let cov = DMatrix::from_fn(j.dim, j.dim, |r, c| j.cov[r][c]);
        GaussianStats::new(j.encoder_id, DVector::from_vec(j.mean), cov, j.count)
    }
}
