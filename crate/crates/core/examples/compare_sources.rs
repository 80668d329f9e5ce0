//! Compare generated-music sources against a reference by their pairwise
//! FAD aggregates.

use std::collections::BTreeMap;

use emofad::report::render_comparison;
use emofad::{compare_sources, FadReport, FadScore, ReportFormat};

const PAIRS: [&str; 6] = ["Q1_Q2", "Q1_Q3", "Q1_Q4", "Q2_Q3", "Q2_Q4", "Q3_Q4"];

fn source(name: &str, values: [f64; 6]) -> FadReport {
    let aggregate: BTreeMap<String, f64> = PAIRS.iter().map(|p| p.to_string()).zip(values).collect();
    let cells = aggregate
        .iter()
        .map(|(p, &value)| {
            let score = FadScore {
                value,
                encoder_id: "mean".into(),
                regularization_applied: false,
                min_eigenvalue_seen: None,
            };
            (p.clone(), score)
        })
        .collect();
    FadReport {
        dataset_id: name.into(),
        pairs: PAIRS.map(String::from).to_vec(),
        encoders: vec!["mean".into()],
        per_encoder: BTreeMap::from([("mean".to_string(), cells)]),
        aggregate,
        normalized: false,
    }
}

fn main() -> emofad::Result<()> {
    let reference = source("EMOPIA (real)", [1.36, 11.60, 11.24, 13.64, 13.18, 1.47]);
    let candidates = [
        source("EmoGen (syn.)", [9.26, 60.06, 30.42, 74.64, 49.45, 26.15]),
        source("MIDIEmo (syn.)", [1.67, 51.68, 35.62, 51.42, 34.93, 3.70]),
        source("Ours (syn.)", [1.61, 33.13, 26.10, 17.93, 15.96, 5.99]),
    ];
    let comparison = compare_sources(&reference, &candidates)?;
    print!("{}", render_comparison(&comparison, ReportFormat::Markdown));
    Ok(())
}
