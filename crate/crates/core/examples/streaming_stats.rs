//! Accumulate statistics in shards, merge them, and save the fit as JSON.

use emofad::synth::{sample, GaussianSpec};
use emofad::{CovarianceMode, GaussianStats, StatsAccumulator};

fn main() -> emofad::Result<()> {
    let set = sample(&GaussianSpec::standard(4, 7), 10_000)?;

    let mut shards: Vec<StatsAccumulator> = (0..4).map(|_| StatsAccumulator::new(set.dim())).collect();
    for (i, row) in set.rows().enumerate() {
        shards[i % 4].accumulate(row.as_slice())?;
    }
    let mut total = shards[0].clone();
    for shard in &shards[1..] {
        total.merge(shard)?;
    }
    let merged = total.finalize(CovarianceMode::Sample)?;
    let direct = GaussianStats::from_embeddings(&set, CovarianceMode::Sample)?;
    println!("count {}", merged.count);
    println!(
        "max |cov difference| merged vs direct: {:.2e}",
        (&merged.cov - &direct.cov).amax()
    );

    let parallel = StatsAccumulator::from_set_sharded(&set, 8).finalize(CovarianceMode::Sample)?;
    println!(
        "max |cov difference| parallel vs direct: {:.2e}",
        (&parallel.cov - &direct.cov).amax()
    );

    let json = direct.clone().with_encoder_id("demo").to_json();
    println!("{}...", &json[..json.len().min(120)]);
    let back = GaussianStats::from_json(&json)?;
    println!("round trip equal: {}", back.cov == direct.cov);
    Ok(())
}
