//! FAD between two Gaussian fits, from explicit moments and from samples.

use emofad::synth::{sample, GaussianSpec};
use emofad::{frechet_distance, matrix_sqrt_psd, CovarianceMode, GaussianStats};
use nalgebra::{DMatrix, DVector};

fn main() -> emofad::Result<()> {
    let a = GaussianStats::new(
        "a",
        DVector::from_vec(vec![0.0, 0.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        0,
    )?;
    let b = GaussianStats::new(
        "b",
        DVector::from_vec(vec![1.0, 1.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
        0,
    )?;
    let score = frechet_distance(&a, &b)?;
    println!("F(a, b) = {} (expected 4)", score.value);
    println!("F(a, a) = {}", frechet_distance(&a, &a)?.value);

    let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let s = matrix_sqrt_psd(&m, emofad::frechet::DEFAULT_TOL)?;
    println!("sqrt([[2, 1], [1, 2]]) = {s}");

    let x = sample(&GaussianSpec::standard(8, 1), 5_000)?;
    let mut shifted = GaussianSpec::standard(8, 2);
    shifted.mean.fill(0.5);
    let y = sample(&shifted, 5_000)?;
    let fx = GaussianStats::from_embeddings(&x, CovarianceMode::Sample)?;
    let fy = GaussianStats::from_embeddings(&y, CovarianceMode::Sample)?;
    println!("sampled F = {:.4} (exact 2.0)", frechet_distance(&fx, &fy)?.value);
    Ok(())
}
