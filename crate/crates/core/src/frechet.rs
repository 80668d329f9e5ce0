//! Frechet distance between two Gaussian fits:
//!
//! ```text
//! F(a, b) = |mu_a - mu_b|^2 + tr(S_a) + tr(S_b) - 2 tr sqrt(S_a^1/2 S_b S_a^1/2)
//! ```
//!
//! `S_a S_b` is similar to the symmetric PSD product `S_a^1/2 S_b S_a^1/2`,
//! so both have the same trace square root, and only the symmetric one is
//! ever formed. All square roots go through a symmetric eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::GaussianStats;

/// Relative eigenvalue tolerance (against the spectral norm).
pub const DEFAULT_TOL: f64 = 1e-10;
/// Ridge added on an eigensolver failure, relative to the mean variance.
pub const RETRY_EPS: f64 = 1e-10;
/// Negative distances down to `-NEGATIVE_SLACK * max(1, tr S_a + tr S_b)`
/// are rounding noise and clamp to zero.
pub const NEGATIVE_SLACK: f64 = 1e-8;

const MAX_EIGEN_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadScore {
    pub value: f64,
    pub encoder_id: String,
    pub regularization_applied: bool,
    /// Smallest eigenvalue of `S_a^1/2 S_b S_a^1/2` before clamping.
    /// Absent for scores read back from a report.
    pub min_eigenvalue_seen: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadConfig {
    /// Diagonal loading applied up front (see [`regularize`]).
    pub eps: f64,
    pub tol: f64,
    /// Retry once with `RETRY_EPS` when the eigensolver fails.
    pub retry_on_failure: bool,
}

impl Default for FadConfig {
    fn default() -> Self {
        FadConfig {
            eps: 0.0,
            tol: DEFAULT_TOL,
            retry_on_failure: true,
        }
    }
}

fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_EIGEN_ITERS).ok_or(Error::EigenFailure)
}

fn check_square_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0 });
    }
    let norm = m.norm();
    if norm > 0.0 {
        let asym = (m - m.transpose()).norm() / norm;
        if asym > tol {
            return Err(Error::NotSymmetric(asym));
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric PSD matrix and its raw minimum
/// eigenvalue. Eigenvalues below `-tol |M|_2` are an error. Everything up to
/// `d * eps * |M|_2` is below what the solver can resolve and is set to zero;
/// left in, its square root would add `O(sqrt(eps))` noise per null
/// direction.
fn psd_spectrum(m: &DMatrix<f64>, tol: f64) -> Result<(SymmetricEigen<f64, nalgebra::Dyn>, f64)> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = symmetric_eigen(&sym)?;
    let spectral = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if min < -tol * spectral {
        return Err(Error::IndefiniteMatrix { min_eigenvalue: min });
    }
    let floor = m.nrows() as f64 * f64::EPSILON * spectral;
    eig.eigenvalues.apply(|v| {
        if *v <= floor {
            *v = 0.0;
        }
    });
    Ok((eig, min))
}

/// Principal square root of a symmetric PSD matrix.
///
/// `m` must be symmetric to within `tol` (relative Frobenius) and have no
/// eigenvalue below `-tol * |m|_2`; small negative eigenvalues are clamped.
/// The result is symmetric PSD with `S * S ~= m`.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    check_square_symmetric(m, tol)?;
    let (mut eig, _) = psd_spectrum(m, tol)?;
    eig.eigenvalues.apply(|v| *v = v.sqrt());
    let s = eig.recompose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `cov + eps * mean(diag(cov)) * I`; mean and count are untouched.
pub fn regularize(stats: &GaussianStats, eps: f64) -> GaussianStats {
    let mut out = stats.clone();
    if eps > 0.0 && stats.dim > 0 {
        let load = eps * stats.cov.trace() / stats.dim as f64;
        for i in 0..stats.dim {
            out.cov[(i, i)] += load;
        }
    }
    out
}

/// `tr sqrt(S_a^1/2 S_b S_a^1/2)` and the minimum raw eigenvalue of the
/// inner product.
fn trace_sqrt_product(cov_a: &DMatrix<f64>, cov_b: &DMatrix<f64>, tol: f64) -> Result<(f64, f64)> {
    let root_a = matrix_sqrt_psd(cov_a, tol)?;
    let inner = &root_a * cov_b * &root_a;
    let (eig, min) = psd_spectrum(&inner, tol)?;
    Ok((eig.eigenvalues.iter().map(|v| v.sqrt()).sum(), min))
}

/// Frechet distance with the default configuration.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<FadScore> {
    frechet_distance_with(a, b, &FadConfig::default())
}

pub fn frechet_distance_with(a: &GaussianStats, b: &GaussianStats, config: &FadConfig) -> Result<FadScore> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let encoder_id = if a.encoder_id.is_empty() {
        b.encoder_id.clone()
    } else {
        a.encoder_id.clone()
    };

    let mut regularized = config.eps > 0.0;
    let (mut a_used, mut b_used) = (regularize(a, config.eps), regularize(b, config.eps));
    let (trace_sqrt, min_eig) = match trace_sqrt_product(&a_used.cov, &b_used.cov, config.tol) {
        Ok(r) => r,
        Err(Error::EigenFailure) if config.retry_on_failure => {
            regularized = true;
            a_used = regularize(&a_used, RETRY_EPS);
            b_used = regularize(&b_used, RETRY_EPS);
            trace_sqrt_product(&a_used.cov, &b_used.cov, config.tol)?
        }
        Err(Error::EigenFailure) => return Err(Error::SingularCovariance),
        Err(e) => return Err(e),
    };

    let mean_term = (&a.mean - &b.mean).norm_squared();
    let traces = a_used.cov.trace() + b_used.cov.trace();
    let mut value = mean_term + traces - 2.0 * trace_sqrt;
    if value < 0.0 {
        if value >= -NEGATIVE_SLACK * traces.max(1.0) {
            value = 0.0;
        } else {
            return Err(Error::NegativeDistance(value));
        }
    }
    Ok(FadScore {
        value,
        encoder_id,
        regularization_applied: regularized,
        min_eigenvalue_seen: Some(min_eig),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn stats(mean: &[f64], cov_diag: &[f64]) -> GaussianStats {
        GaussianStats::new(
            "t",
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(cov_diag)),
            100,
        )
        .unwrap()
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn sqrt_of_identity() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert!(rel_err(&matrix_sqrt_psd(&i, DEFAULT_TOL).unwrap(), &i) < 1e-14);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[4.0, 9.0]));
        let s = matrix_sqrt_psd(&m, DEFAULT_TOL).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 3.0]));
        assert!(rel_err(&s, &expected) < 1e-14);
    }

    #[test]
    fn sqrt_of_gram_matrix() {
        // deterministic pseudo-random A, M = A^T A
        let d = 32;
        let a = DMatrix::from_fn(d + 8, d, |r, c| (((r * 31 + c * 17) % 23) as f64 - 11.0) / 7.0);
        let m = a.transpose() * &a;
        let s = matrix_sqrt_psd(&m, DEFAULT_TOL).unwrap();
        assert!(rel_err(&(&s * &s), &m) <= 1e-8);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn sqrt_clamps_tiny_negatives_but_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1e-13]));
        let s = matrix_sqrt_psd(&m, DEFAULT_TOL).unwrap();
        assert_eq!(s[(1, 1)], 0.0);

        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1e-3]));
        assert!(matches!(
            matrix_sqrt_psd(&m, DEFAULT_TOL),
            Err(Error::IndefiniteMatrix { .. })
        ));
    }

    #[test]
    fn rank_deficient_self_distance_is_zero() {
        let d = 15;
        let a = DMatrix::from_fn(d, 8, |r, c| (((r * 7 + c * 13) % 11) as f64 - 5.0) / 3.0);
        let s = GaussianStats::new("t", DVector::zeros(d), &a * a.transpose(), 10).unwrap();
        let f = frechet_distance(&s, &s).unwrap();
        assert!(f.value <= 1e-10 * s.cov.trace(), "{}", f.value);
    }

    #[test]
    fn sqrt_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(matches!(matrix_sqrt_psd(&m, DEFAULT_TOL), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn self_distance_is_zero() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let s = GaussianStats::new("t", DVector::from_column_slice(&[5.0, -1.0, 2.0]), cov, 10).unwrap();
        assert!(frechet_distance(&s, &s).unwrap().value <= 1e-12);
    }

    #[test]
    fn one_dimensional_cases() {
        let f = frechet_distance(&stats(&[0.0], &[1.0]), &stats(&[1.0], &[1.0])).unwrap();
        assert!((f.value - 1.0).abs() < 1e-12);
        let f = frechet_distance(&stats(&[0.0], &[4.0]), &stats(&[0.0], &[1.0])).unwrap();
        assert!((f.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_diagonal_case() {
        let a = stats(&[0.0, 0.0], &[1.0, 4.0]);
        let b = stats(&[1.0, 1.0], &[4.0, 1.0]);
        let f = frechet_distance(&a, &b).unwrap();
        assert!((f.value - 4.0).abs() < 1e-12);
        assert!(!f.regularization_applied);
        assert!((f.min_eigenvalue_seen.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            frechet_distance(&stats(&[0.0], &[1.0]), &stats(&[0.0, 0.0], &[1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rank_deficient_covariances_work() {
        let a = stats(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        let b = stats(&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        let f = frechet_distance(&a, &b).unwrap();
        assert!((f.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regularize_cases() {
        let s = stats(&[1.0, 2.0], &[1.0, 3.0]);
        assert_eq!(regularize(&s, 0.0), s);
        let r = regularize(&s, 0.5);
        assert_eq!(r.cov, DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 4.0])));
        assert_eq!(r.mean, s.mean);
        assert_eq!(r.count, s.count);

        let z = stats(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(regularize(&z, 1e-6).cov, DMatrix::zeros(2, 2));
    }

    #[test]
    fn explicit_eps_is_recorded() {
        let s = stats(&[0.0, 0.0], &[1.0, 2.0]);
        let cfg = FadConfig {
            eps: 1e-6,
            ..FadConfig::default()
        };
        let f = frechet_distance_with(&s, &s, &cfg).unwrap();
        assert!(f.regularization_applied);
        assert!(f.value < 1e-12);
    }
}
