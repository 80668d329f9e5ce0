//! Pairwise FAD between valence/arousal quadrants for two encoders.

use std::collections::BTreeMap;

use emofad::io::parse_manifest;
use emofad::synth::{sample, GaussianSpec};
use emofad::{pairwise_fad, partition, EmbeddingSet, GroupBy, PairwiseConfig, QuadrantConvention, ReportFormat};
use nalgebra::DMatrix;

const PER_QUADRANT: usize = 40;

fn main() -> emofad::Result<()> {
    let cells = [(0.6, 0.6), (-0.6, 0.6), (-0.6, -0.6), (0.6, -0.6)];
    let mut csv = String::from("clip_id,valence,arousal,label\n");
    for (q, (v, a)) in cells.iter().enumerate() {
        for i in 0..PER_QUADRANT {
            csv.push_str(&format!("c{q}_{i},{v},{a},\n"));
        }
    }
    let manifest = parse_manifest(csv.as_bytes())?;
    let groups = partition(&manifest, GroupBy::Quadrant, QuadrantConvention::EmoMusic)?;

    // Each encoder sees the sign cells as shifted Gaussians; arousal moves
    // the mean more than valence.
    let mut sets = BTreeMap::new();
    for (e, name) in ["encoder_a", "encoder_b"].iter().enumerate() {
        let mut rows = DMatrix::zeros(manifest.records.len(), 6);
        for (q, (v, a)) in cells.iter().enumerate() {
            let mut spec = GaussianSpec::standard(6, (10 * e + q) as u64);
            spec.mean[0] = 0.5 * v;
            spec.mean[1] = 2.0 * a;
            let block = sample(&spec, PER_QUADRANT)?;
            rows.rows_mut(q * PER_QUADRANT, PER_QUADRANT).copy_from(block.vectors());
        }
        let ids = manifest.records.iter().map(|r| r.clip_id.clone()).collect();
        sets.insert(name.to_string(), EmbeddingSet::new(*name, rows, ids)?);
    }

    let config = PairwiseConfig {
        dataset_id: "toy".into(),
        jobs: 4,
        ..PairwiseConfig::default()
    };
    let report = pairwise_fad(&groups, &sets, &config)?;
    print!("{}", emofad::report::render_report(&report, ReportFormat::Markdown));
    Ok(())
}
