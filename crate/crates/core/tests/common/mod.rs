#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use emofad::io::{ClipRecord, DatasetManifest};
use emofad::{write_embeddings, EmbeddingSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// `A A^T / r` for a `d x r` Gaussian `A`; rank `min(d, r)`.
pub fn random_psd(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, d, rank);
    &a * a.transpose() / rank as f64
}

/// Textbook two-pass sample covariance of the rows of `x`.
pub fn two_pass_cov(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let d = x.ncols();
    let mut mean = DVector::zeros(d);
    for r in 0..n {
        for c in 0..d {
            mean[c] += x[(r, c)];
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for r in 0..n {
        for i in 0..d {
            let di = x[(r, i)] - mean[i];
            for j in 0..d {
                cov[(i, j)] += di * (x[(r, j)] - mean[j]);
            }
        }
    }
    (mean, cov / (n as f64 - 1.0))
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Signs of (valence, arousal) for the four sign cells, in the order
/// (+,+), (-,+), (-,-), (+,-).
pub const SIGN_CELLS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

/// `per_group` clips in each of `groups` clusters. Cluster `g` sits in sign
/// cell `g % 4` and carries label `c{g+1}`.
pub fn fixture_manifest(groups: usize, per_group: usize, seed: u64) -> DatasetManifest {
    let mut rng = rng(seed);
    let mut records = Vec::new();
    for g in 0..groups {
        let (sv, sa) = SIGN_CELLS[g % 4];
        for i in 0..per_group {
            records.push(ClipRecord {
                clip_id: format!("clip_{g}_{i:03}"),
                valence: Some(sv * rng.random_range(0.1..0.9)),
                arousal: Some(sa * rng.random_range(0.1..0.9)),
                label: Some(format!("c{}", g + 1)),
            });
        }
    }
    DatasetManifest::new(records).unwrap()
}

pub fn manifest_csv(manifest: &DatasetManifest) -> String {
    let mut out = String::from("clip_id,valence,arousal,label\n");
    for r in &manifest.records {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            r.clip_id,
            opt(r.valence),
            opt(r.arousal),
            r.label.clone().unwrap_or_default()
        )
        .unwrap();
    }
    out
}

/// One embedding set per encoder, rows in manifest order. Each label gets
/// its own mean offset so pair distances differ.
pub fn fixture_embeddings(manifest: &DatasetManifest, encoder: &str, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = rng(seed);
    let n = manifest.records.len();
    let mut x = normal_matrix(&mut rng, n, dim);
    for (r, rec) in manifest.records.iter().enumerate() {
        let g: usize = rec.label.as_ref().unwrap()[1..].parse().unwrap();
        for c in 0..dim {
            x[(r, c)] += 0.3 * g as f64 * ((c + g) % 3) as f64;
        }
    }
    let ids = manifest.records.iter().map(|r| r.clip_id.clone()).collect();
    EmbeddingSet::new(encoder, x, ids).unwrap()
}

/// Writes `manifest.csv` and `emb/<encoder>.npy` (+ `.ids`) under `dir`.
pub fn write_fixture(dir: &Path, manifest: &DatasetManifest, encoders: &[&str], dim: usize) -> (PathBuf, PathBuf) {
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest_csv(manifest)).unwrap();
    let emb_dir = dir.join("emb");
    fs::create_dir_all(&emb_dir).unwrap();
    for (i, enc) in encoders.iter().enumerate() {
        let set = fixture_embeddings(manifest, enc, dim, 100 + i as u64);
        write_embeddings(&set, emb_dir.join(format!("{enc}.npy"))).unwrap();
    }
    (manifest_path, emb_dir)
}
