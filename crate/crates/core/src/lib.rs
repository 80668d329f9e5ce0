//! Frechet Audio Distance (FAD) over music embeddings, grouped by emotion.
//!
//! The pieces, in pipeline order:
//!
//! - [`io`]: `.npy` / CSV embedding matrices with `.ids` clip-id sidecars,
//!   and CSV dataset manifests of valence, arousal and labels.
//! - [`stats`]: streaming, mergeable mean and covariance.
//! - [`frechet`]: the distance between two Gaussian fits,
//!   `|mu_a - mu_b|^2 + tr S_a + tr S_b - 2 tr (S_a^1/2 S_b S_a^1/2)^1/2`.
//! - [`partition`]: valence/arousal quadrants and label groups.
//! - [`report`]: pairwise FAD tables across encoders and comparisons
//!   between sources.
//! - [`metrics`]: R^2, accuracy and F1, and cross-validated linear probes.
//! - [`conditioning`]: emotion embeddings and cross-attention onto music
//!   tokens.
//! - [`synth`]: synthetic Gaussians and independent reference values.
//! - [`cli`]: the `emofad` command.
//!
//! ```
//! use emofad::{frechet_distance, GaussianStats};
//! use nalgebra::{DMatrix, DVector};
//!
//! let a = GaussianStats::new("a", DVector::from_vec(vec![0.0, 0.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])), 0)?;
//! let b = GaussianStats::new("b", DVector::from_vec(vec![1.0, 1.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), 0)?;
//! let fad = frechet_distance(&a, &b)?;
//! assert!((fad.value - 4.0).abs() < 1e-9);
//! # Ok::<(), emofad::Error>(())
//! ```

pub mod cli;
pub mod conditioning;
pub mod error;
pub mod frechet;
pub mod io;
pub mod metrics;
pub mod partition;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use frechet::{frechet_distance, frechet_distance_with, matrix_sqrt_psd, FadConfig, FadScore};
pub use io::{load_embeddings, load_manifest, write_embeddings, DatasetManifest, EmbeddingSet};
pub use partition::{enumerate_pairs, partition, GroupBy, GroupPartition, Quadrant, QuadrantConvention};
pub use report::{compare_sources, pairwise_fad, ComparisonReport, FadReport, PairwiseConfig, ReportFormat};
pub use stats::{CovarianceMode, GaussianStats, StatsAccumulator};
