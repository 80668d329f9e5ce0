//! Cross-validated linear probes: ridge for valence, softmax for quadrants.

use emofad::metrics::probe::{cross_validate_classification, cross_validate_regression, CvConfig};
use emofad::metrics::ProbeMetric;
use emofad::partition::va_to_quadrant;
use emofad::QuadrantConvention;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> emofad::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    let va: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    // Embeddings: a noisy linear view of (valence, arousal) plus nuisance dims.
    let x = DMatrix::from_fn(n, 6, |i, c| {
        let (v, a) = va[i];
        let noise: f64 = rng.random_range(-0.2..0.2);
        [v, a, v + a, v - a, 0.0, 0.0][c] + noise
    });

    let config = CvConfig::default();
    let valence: Vec<f64> = va.iter().map(|p| p.0).collect();
    let r2 = cross_validate_regression(&x, &valence, &config)?;
    println!("valence R2 per fold {:?}, mean {:.3}", r2.fold_scores, r2.mean);

    let quadrants: Vec<usize> = va
        .iter()
        .map(|&(v, a)| va_to_quadrant(v, a, QuadrantConvention::EmoMusic).map(|q| q.index()))
        .collect::<emofad::Result<_>>()?;
    for metric in [ProbeMetric::Wa, ProbeMetric::Ua, ProbeMetric::F1] {
        let cv = cross_validate_classification(&x, &quadrants, metric, &config)?;
        println!("quadrant {} mean {:.3}", metric.as_str(), cv.mean);
    }
    Ok(())
}
