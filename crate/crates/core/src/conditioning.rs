//! Emotion conditioning head: a quadrant embedding and a valence/arousal
//! embedding blended by `wgt_q`, then fused with music token states by one
//! softmax cross-attention:
//!
//! ```text
//! emotion = wgt_q * embd_q + (1 - wgt_q) * embd_va
//! EM      = softmax(Q_e K_m^T / sqrt(d_k)) V_m
//! ```
//!
//! Forward pass only; weights are loaded from a JSON fixture.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Quadrant, QuadrantConvention};

/// Smallest magnitude a coordinate may have after being pushed into its
/// quadrant.
pub const MIN_MAGNITUDE: f64 = 0.05;

/// Moves `(valence, arousal)` into `quadrant`'s sign cell.
///
/// Coordinates already strictly on the quadrant's side are kept. A
/// coordinate on the wrong side (or exactly zero) is reflected to the
/// quadrant's sign with its magnitude kept, then floored to `MIN_MAGNITUDE`.
pub fn clamp_to_quadrant(valence: f64, arousal: f64, quadrant: Quadrant, convention: QuadrantConvention) -> (f64, f64) {
    let (v_pos, a_pos) = convention.signs(quadrant);
    let fix = |x: f64, positive: bool| {
        let sign = if positive { 1.0 } else { -1.0 };
        if x * sign > 0.0 {
            x
        } else {
            sign * x.abs().max(MIN_MAGNITUDE)
        }
    };
    (fix(valence, v_pos), fix(arousal, a_pos))
}

/// Target emotion for one generation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionCondition {
    pub quadrant: Quadrant,
    pub valence: f64,
    pub arousal: f64,
    /// Share of the quadrant embedding, in `[0, 1]`.
    pub wgt_q: f64,
}

impl EmotionCondition {
    /// Validates ranges and pulls `(valence, arousal)` into `quadrant` with
    /// [`clamp_to_quadrant`].
    pub fn new(
        quadrant: Quadrant,
        valence: f64,
        arousal: f64,
        wgt_q: f64,
        convention: QuadrantConvention,
    ) -> Result<Self> {
        for (name, value) in [("valence", valence), ("arousal", arousal)] {
            if !value.is_finite() {
                return Err(Error::NonFinite { row: 0 });
            }
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!("{name} {value} outside [-1, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&wgt_q) {
            return Err(Error::InvalidArgument(format!("wgt_q {wgt_q} outside [0, 1]")));
        }
        let (valence, arousal) = clamp_to_quadrant(valence, arousal, quadrant, convention);
        Ok(EmotionCondition {
            quadrant,
            valence,
            arousal,
            wgt_q,
        })
    }

    /// Quadrant taken from the signs of `(valence, arousal)`.
    pub fn from_va(valence: f64, arousal: f64, wgt_q: f64, convention: QuadrantConvention) -> Result<Self> {
        let quadrant = crate::partition::va_to_quadrant(valence, arousal, convention)?;
        Self::new(quadrant, valence, arousal, wgt_q, convention)
    }
}

/// Projections of the conditioning head.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningWeights {
    pub h: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub m_dim: usize,
    /// `4 x h`, one row per quadrant (Q1..Q4).
    pub quadrant_table: DMatrix<f64>,
    /// `2 x h`; `embd_va = (v, a) * va_projection + va_bias`.
    pub va_projection: DMatrix<f64>,
    pub va_bias: RowDVector<f64>,
    /// `h x d_k`
    pub attn_q: DMatrix<f64>,
    /// `m_dim x d_k`
    pub attn_k: DMatrix<f64>,
    /// `m_dim x d_v`
    pub attn_v: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsJson {
    h: usize,
    d_k: usize,
    d_v: usize,
    m_dim: usize,
    quadrant_table: Vec<Vec<f64>>,
    va_projection: Vec<Vec<f64>>,
    va_bias: Vec<f64>,
    attn_q: Vec<Vec<f64>>,
    attn_k: Vec<Vec<f64>>,
    attn_v: Vec<Vec<f64>>,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        let found = (rows.len(), rows.first().map_or(0, Vec::len));
        return Err(Error::Shape(format!(
            "{name}: expected {nrows}x{ncols}, found {}x{}",
            found.0, found.1
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ConditioningWeights {
    pub fn from_json(text: &str) -> Result<Self> {
        let j: WeightsJson = serde_json::from_str(text)?;
        if j.h == 0 || j.d_k == 0 || j.d_v == 0 || j.m_dim == 0 {
            return Err(Error::Shape("h, d_k, d_v and m_dim must be >= 1".into()));
        }
        if j.va_bias.len() != j.h {
            return Err(Error::Shape(format!(
                "va_bias: expected {}, found {}",
                j.h,
                j.va_bias.len()
            )));
        }
        let w = ConditioningWeights {
            h: j.h,
            d_k: j.d_k,
            d_v: j.d_v,
            m_dim: j.m_dim,
            quadrant_table: matrix_from_rows("quadrant_table", &j.quadrant_table, 4, j.h)?,
            va_projection: matrix_from_rows("va_projection", &j.va_projection, 2, j.h)?,
            va_bias: RowDVector::from_vec(j.va_bias),
            attn_q: matrix_from_rows("attn_q", &j.attn_q, j.h, j.d_k)?,
            attn_k: matrix_from_rows("attn_k", &j.attn_k, j.m_dim, j.d_k)?,
            attn_v: matrix_from_rows("attn_v", &j.attn_v, j.m_dim, j.d_v)?,
        };
        let all = [&w.quadrant_table, &w.va_projection, &w.attn_q, &w.attn_k, &w.attn_v];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) || w.va_bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0 });
        }
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let j = WeightsJson {
            h: self.h,
            d_k: self.d_k,
            d_v: self.d_v,
            m_dim: self.m_dim,
            quadrant_table: rows_of(&self.quadrant_table),
            va_projection: rows_of(&self.va_projection),
            va_bias: self.va_bias.iter().copied().collect(),
            attn_q: rows_of(&self.attn_q),
            attn_k: rows_of(&self.attn_k),
            attn_v: rows_of(&self.attn_v),
        };
        serde_json::to_string_pretty(&j).expect("weights serialize")
    }

    pub fn quadrant_embedding(&self, quadrant: Quadrant) -> RowDVector<f64> {
        self.quadrant_table.row(quadrant.index()).into_owned()
    }

    pub fn va_embedding(&self, valence: f64, arousal: f64) -> RowDVector<f64> {
        RowDVector::from_row_slice(&[valence, arousal]) * &self.va_projection + &self.va_bias
    }
}

/// `wgt_q * embd_q + (1 - wgt_q) * embd_va`, a `1 x h` row.
pub fn emotion_embedding(cond: &EmotionCondition, w: &ConditioningWeights) -> Result<RowDVector<f64>> {
    if w.quadrant_table.ncols() != w.h || w.va_projection.ncols() != w.h || w.va_bias.len() != w.h {
        return Err(Error::DimensionMismatch {
            expected: w.h,
            found: w.va_projection.ncols(),
        });
    }
    let q = w.quadrant_embedding(cond.quadrant);
    let va = w.va_embedding(cond.valence, cond.arousal);
    Ok(q * cond.wgt_q + va * (1.0 - cond.wgt_q))
}

/// `T x m_dim` music token states.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicEmbedding(DMatrix<f64>);

impl MusicEmbedding {
    pub fn new(tokens: DMatrix<f64>) -> Result<Self> {
        if tokens.nrows() == 0 || tokens.ncols() == 0 {
            return Err(Error::Shape("music embedding needs at least one token".into()));
        }
        if let Some(row) = (0..tokens.nrows()).find(|&r| tokens.row(r).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { row });
        }
        Ok(MusicEmbedding(tokens))
    }

    pub fn tokens(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `queries x d_v`, the emotion-aligned music embedding.
    pub output: DMatrix<f64>,
    /// `queries x T`, rows sum to one.
    pub weights: DMatrix<f64>,
}

/// `softmax(q k^T / sqrt(d_k)) v` with `d_k = q.ncols()`. Each softmax row
/// is shifted by its maximum before exponentiation.
pub fn scaled_dot_product_attention(q: &DMatrix<f64>, k: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<AttentionOutput> {
    if q.ncols() != k.ncols() {
        return Err(Error::DimensionMismatch {
            expected: q.ncols(),
            found: k.ncols(),
        });
    }
    if k.nrows() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            found: v.nrows(),
        });
    }
    if q.ncols() == 0 || k.nrows() == 0 {
        return Err(Error::Shape("attention needs d_k >= 1 and at least one key".into()));
    }
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut weights = q * k.transpose() * scale;
    for mut row in weights.row_iter_mut() {
        let max = row.max();
        row.apply(|x| *x = (*x - max).exp());
        let z = row.sum();
        row /= z;
    }
    if weights.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: 0 });
    }
    let output = &weights * v;
    Ok(AttentionOutput { output, weights })
}

/// Cross-attention from emotion queries (`rows x h`) onto music tokens:
/// `Q_e = queries attn_q`, `K_m = music attn_k`, `V_m = music attn_v`.
pub fn cross_attention(
    queries: &DMatrix<f64>,
    music: &MusicEmbedding,
    w: &ConditioningWeights,
) -> Result<AttentionOutput> {
    if queries.ncols() != w.attn_q.nrows() {
        return Err(Error::DimensionMismatch {
            expected: w.attn_q.nrows(),
            found: queries.ncols(),
        });
    }
    if music.0.ncols() != w.attn_k.nrows() || music.0.ncols() != w.attn_v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: w.attn_k.nrows(),
            found: music.0.ncols(),
        });
    }
    if queries.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: 0 });
    }
    let q_e = queries * &w.attn_q;
    let k_m = &music.0 * &w.attn_k;
    let v_m = &music.0 * &w.attn_v;
    scaled_dot_product_attention(&q_e, &k_m, &v_m)
}

/// Emotion embedding for `cond` fused with `music`; a `1 x d_v` result.
pub fn condition_music(
    cond: &EmotionCondition,
    music: &MusicEmbedding,
    w: &ConditioningWeights,
) -> Result<AttentionOutput> {
    let emotion = emotion_embedding(cond, w)?;
    let queries = DMatrix::from_row_slice(1, emotion.len(), emotion.as_slice());
    cross_attention(&queries, music, w)
}
