//! Cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Deliberately separate from the tridiagonal QR path used by
//! [`crate::frechet`]: oracle values computed here share no decomposition
//! code with the implementation they check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (unsorted) and orthonormal eigenvectors (as columns) of a
/// symmetric matrix. Only the upper triangle's mirror is assumed, i.e. the
/// input is symmetrized first.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = m.nrows();
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.ncols(),
        });
    }
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(d, d);
    let scale = a.norm();
    if scale == 0.0 {
        return Ok((DVector::zeros(d), v));
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            return Ok((a.diagonal(), v));
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::EigenFailure)
}

/// `V diag(f(lambda)) V^T`.
pub fn apply_spectral(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = jacobi_eigen(m)?;
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, c)] * f(values[c]));
    Ok(scaled * vectors.transpose())
}

/// PSD square root with negative eigenvalues clamped to zero.
pub fn jacobi_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    apply_spectral(m, |l| l.max(0.0).sqrt())
}
