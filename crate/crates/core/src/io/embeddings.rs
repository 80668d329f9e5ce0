use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::manifest::DatasetManifest;
use super::npy;
use crate::error::{Error, Result};

/// An `n x d` matrix of clip embeddings produced by one encoder.
///
/// Rows are clips, columns are embedding dimensions. All values are finite
/// `f64`; 32-bit inputs are widened on load. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    encoder_id: String,
    vectors: DMatrix<f64>,
    clip_ids: Vec<String>,
}

impl EmbeddingSet {
    /// Builds a set, checking shape, finiteness and id uniqueness.
    /// `clip_ids` may be empty; otherwise it must have one entry per row.
    pub fn new(encoder_id: impl Into<String>, vectors: DMatrix<f64>, clip_ids: Vec<String>) -> Result<Self> {
        let (n, d) = vectors.shape();
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!(
                "expected a non-empty 2-D array, found shape ({n}, {d})"
            )));
        }
        if let Some(row) = (0..n).find(|&r| vectors.row(r).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { row });
        }
        if !clip_ids.is_empty() {
            if clip_ids.len() != n {
                return Err(Error::Shape(format!(
                    "{} clip ids for {n} embedding rows",
                    clip_ids.len()
                )));
            }
            let mut seen = HashSet::with_capacity(n);
            for id in &clip_ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::DuplicateClipId(id.clone()));
                }
            }
        }
        Ok(EmbeddingSet {
            encoder_id: encoder_id.into(),
            vectors,
            clip_ids,
        })
    }

    /// Builds a set from row vectors.
    pub fn from_rows(encoder_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Shape(format!("row {i} has {} entries, expected {d}", r.len())));
        }
        let vectors = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
        Self::new(encoder_id, vectors, Vec::new())
    }

    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    /// Row `i` as a column vector (copied, since storage is column-major).
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.vectors.row(i).transpose()
    }

    /// Iterates over rows as owned vectors.
    pub fn rows(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    /// The set transposed to `d x n`, so each column is one clip and columns
    /// are contiguous.
    pub fn columns(&self) -> DMatrix<f64> {
        self.vectors.transpose()
    }

    pub fn with_encoder_id(mut self, encoder_id: impl Into<String>) -> Self {
        self.encoder_id = encoder_id.into();
        self
    }

    pub fn with_clip_ids(self, clip_ids: Vec<String>) -> Result<Self> {
        Self::new(self.encoder_id, self.vectors, clip_ids)
    }

    /// Picks rows by clip id, in the requested order.
    pub fn select_rows<S: AsRef<str>>(&self, ids: &[S]) -> Result<EmbeddingSet> {
        let index: HashMap<&str, usize> = self
            .clip_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownClipId(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let vectors = self.vectors.select_rows(rows.iter());
        let clip_ids = ids.iter().map(|s| s.as_ref().to_string()).collect();
        EmbeddingSet::new(self.encoder_id.clone(), vectors, clip_ids)
    }

    /// Attaches manifest clip ids when the set has none.
    ///
    /// Sets that already carry ids (from a sidecar) are returned as is; sets
    /// without ids must have exactly one row per manifest record, in manifest
    /// order.
    pub fn align_to_manifest(self, manifest: &DatasetManifest) -> Result<EmbeddingSet> {
        if !self.clip_ids.is_empty() {
            return Ok(self);
        }
        if self.len() != manifest.records.len() {
            return Err(Error::RowCountMismatch {
                encoder: self.encoder_id,
                rows: self.vectors.nrows(),
                expected: manifest.records.len(),
            });
        }
        let ids = manifest.records.iter().map(|r| r.clip_id.clone()).collect();
        self.with_clip_ids(ids)
    }
}

/// Path of the clip-id sidecar for an embedding file: same basename, `.ids`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("ids")
}

/// Loads an embedding matrix from `.npy` (or headerless CSV for `.csv`
/// files). A `.ids` sidecar next to the file, when present, supplies the
/// clip ids.
pub fn load_embeddings(path: impl AsRef<Path>, encoder_id: &str) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let vectors = if is_csv {
        parse_csv_matrix(&bytes)?
    } else {
        let arr = npy::read_npy(&bytes)?;
        if arr.shape.len() != 2 {
            return Err(Error::Shape(format!("expected 2-D array, found {}-D", arr.shape.len())));
        }
        let (n, d) = (arr.shape[0], arr.shape[1]);
        DMatrix::from_row_slice(n, d, &arr.data)
    };

    let sidecar = sidecar_path(path);
    let clip_ids = if sidecar.is_file() {
        read_sidecar(&sidecar)?
    } else {
        Vec::new()
    };
    EmbeddingSet::new(encoder_id, vectors, clip_ids)
}

fn parse_csv_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {i}: {cell:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]))
}

fn read_sidecar(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Writes `set` as `.npy` (`<f8`, C order) plus a `.ids` sidecar when the
/// set carries clip ids.
pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(128 + 8 * set.len() * set.dim());
    let row_major: Vec<f64> = set.vectors.transpose().as_slice().to_vec();
    npy::write_npy_f64(&mut buf, &[set.len(), set.dim()], &row_major).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    if !set.clip_ids.is_empty() {
        let mut ids = set.clip_ids.join("\n");
        ids.push('\n');
        let sidecar = sidecar_path(path);
        fs::write(&sidecar, ids).map_err(|e| Error::io(sidecar, e))?;
    }
    Ok(())
}
