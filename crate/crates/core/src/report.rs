//! Pairwise group FAD across encoders, cross-encoder averaging, and the
//! JSON / Markdown / CSV renderings of the resulting tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::{frechet_distance_with, FadConfig, FadScore};
use crate::io::EmbeddingSet;
use crate::partition::{enumerate_pairs, GroupPartition};
use crate::stats::{CovarianceMode, GaussianStats};

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseConfig {
    pub dataset_id: String,
    pub covariance_mode: CovarianceMode,
    pub fad: FadConfig,
    /// Worker threads for the (encoder x group) and (encoder x pair) grids.
    pub jobs: usize,
    /// Min-max normalize each encoder's scores across pairs before
    /// averaging. Off by default; raw scores are kept either way.
    pub normalize: bool,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        PairwiseConfig {
            dataset_id: "dataset".into(),
            covariance_mode: CovarianceMode::Sample,
            fad: FadConfig::default(),
            jobs: 1,
            normalize: false,
        }
    }
}

/// FAD for every group pair under every encoder, plus the per-pair mean over
/// encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct FadReport {
    pub dataset_id: String,
    /// Pair labels (`Q1_Q2`, ...) in lexicographic order.
    pub pairs: Vec<String>,
    /// Sorted.
    pub encoders: Vec<String>,
    pub per_encoder: BTreeMap<String, BTreeMap<String, FadScore>>,
    pub aggregate: BTreeMap<String, f64>,
    pub normalized: bool,
}

/// Arithmetic mean, summed in key order so the result does not depend on
/// how the map was built.
pub fn aggregate_encoders(scores: &BTreeMap<String, f64>) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(scores.values().sum::<f64>() / scores.len() as f64)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs FAD over every (encoder, group pair) cell.
///
/// Every clip of every group must have a row (matched by clip id) in every
/// embedding set, and every group needs at least two clips.
pub fn pairwise_fad(
    partition: &GroupPartition,
    embeddings: &BTreeMap<String, EmbeddingSet>,
    config: &PairwiseConfig,
) -> Result<FadReport> {
    let pairs = enumerate_pairs(partition)?;
    if embeddings.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (group, clips) in &partition.groups {
        if clips.len() < 2 {
            return Err(Error::GroupTooSmall {
                group: group.clone(),
                count: clips.len(),
            });
        }
    }

    let groups: Vec<(&String, &Vec<String>)> = partition.groups.iter().collect();
    let mut group_cells = Vec::new();
    for (encoder, set) in embeddings {
        let known: HashSet<&str> = set.clip_ids().iter().map(String::as_str).collect();
        for (g, (_, clips)) in groups.iter().enumerate() {
            if let Some(clip) = clips.iter().find(|c| !known.contains(c.as_str())) {
                return Err(Error::MissingEmbedding {
                    clip: clip.clone(),
                    encoder: encoder.clone(),
                });
            }
            group_cells.push((encoder.as_str(), g));
        }
    }

    let pool = thread_pool(config.jobs)?;
    let group_index: BTreeMap<&str, usize> = groups
        .iter()
        .enumerate()
        .map(|(i, (label, _))| (label.as_str(), i))
        .collect();

    let scores = pool.install(|| -> Result<_> {
        let stats: Vec<GaussianStats> = group_cells
            .par_iter()
            .map(|&(encoder, g)| {
                let subset = embeddings[encoder].select_rows(groups[g].1)?;
                GaussianStats::from_embeddings(&subset, config.covariance_mode).map(|s| s.with_encoder_id(encoder))
            })
            .collect::<Result<_>>()?;

        let n_groups = groups.len();
        let cells: Vec<(usize, usize)> = (0..embeddings.len())
            .flat_map(|e| (0..pairs.len()).map(move |p| (e, p)))
            .collect();
        let scores: Vec<FadScore> = cells
            .par_iter()
            .map(|&(e, p)| {
                let a = &stats[e * n_groups + group_index[pairs[p].first.as_str()]];
                let b = &stats[e * n_groups + group_index[pairs[p].second.as_str()]];
                frechet_distance_with(a, b, &config.fad)
            })
            .collect::<Result<_>>()?;
        Ok(scores)
    })?;

    let pair_labels: Vec<String> = pairs.iter().map(|p| p.label()).collect();
    let encoders: Vec<String> = embeddings.keys().cloned().collect();
    let mut per_encoder: BTreeMap<String, BTreeMap<String, FadScore>> = BTreeMap::new();
    for (e, encoder) in encoders.iter().enumerate() {
        let row = pair_labels
            .iter()
            .enumerate()
            .map(|(p, label)| (label.clone(), scores[e * pair_labels.len() + p].clone()))
            .collect();
        per_encoder.insert(encoder.clone(), row);
    }

    let aggregate = aggregate_table(&pair_labels, &per_encoder, config.normalize)?;
    Ok(FadReport {
        dataset_id: config.dataset_id.clone(),
        pairs: pair_labels,
        encoders,
        per_encoder,
        aggregate,
        normalized: config.normalize,
    })
}

fn aggregate_table(
    pairs: &[String],
    per_encoder: &BTreeMap<String, BTreeMap<String, FadScore>>,
    normalize: bool,
) -> Result<BTreeMap<String, f64>> {
    // encoder -> pair -> value that enters the mean
    let mut used: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for (encoder, row) in per_encoder {
        let mut values: BTreeMap<&str, f64> = row.iter().map(|(p, s)| (p.as_str(), s.value)).collect();
        if normalize {
            let lo = values.values().copied().fold(f64::INFINITY, f64::min);
            let hi = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            for v in values.values_mut() {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
        used.insert(encoder, values);
    }
    pairs
        .iter()
        .map(|pair| {
            let column: BTreeMap<String, f64> = used
                .iter()
                .map(|(enc, row)| {
                    row.get(pair.as_str())
                        .map(|v| (enc.to_string(), *v))
                        .ok_or_else(|| Error::PairSetMismatch(format!("{enc} lacks {pair}")))
                })
                .collect::<Result<_>>()?;
            Ok((pair.clone(), aggregate_encoders(&column)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format {other:?} (json|markdown|csv)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CellJson {
    value: f64,
    regularized: bool,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    dataset: String,
    pairs: Vec<String>,
    encoders: Vec<String>,
    per_encoder: BTreeMap<String, BTreeMap<String, CellJson>>,
    aggregate: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    normalized: bool,
}

impl FadReport {
    pub fn to_json(&self) -> String {
        let wire = ReportJson {
            dataset: self.dataset_id.clone(),
            pairs: self.pairs.clone(),
            encoders: self.encoders.clone(),
            per_encoder: self
                .per_encoder
                .iter()
                .map(|(enc, row)| {
                    let cells = row
                        .iter()
                        .map(|(pair, s)| {
                            (
                                pair.clone(),
                                CellJson {
                                    value: s.value,
                                    regularized: s.regularization_applied,
                                },
                            )
                        })
                        .collect();
                    (enc.clone(), cells)
                })
                .collect(),
            aggregate: self.aggregate.clone(),
            normalized: self.normalized,
        };
        let mut text = serde_json::to_string_pretty(&wire).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: ReportJson = serde_json::from_str(text)?;
        let mut pair_set: Vec<&String> = wire.aggregate.keys().collect();
        let mut listed: Vec<&String> = wire.pairs.iter().collect();
        pair_set.sort();
        listed.sort();
        if pair_set != listed {
            return Err(Error::PairSetMismatch(format!(
                "report {:?}: 'pairs' and 'aggregate' disagree",
                wire.dataset
            )));
        }
        let per_encoder = wire
            .per_encoder
            .into_iter()
            .map(|(enc, row)| {
                let scores = row
                    .into_iter()
                    .map(|(pair, cell)| {
                        let score = FadScore {
                            value: cell.value,
                            encoder_id: enc.clone(),
                            regularization_applied: cell.regularized,
                            min_eigenvalue_seen: None,
                        };
                        (pair, score)
                    })
                    .collect();
                (enc, scores)
            })
            .collect();
        Ok(FadReport {
            dataset_id: wire.dataset,
            pairs: wire.pairs,
            encoders: wire.encoders,
            per_encoder,
            aggregate: wire.aggregate,
            normalized: wire.normalized,
        })
    }

    /// Report rows: one per encoder, then the cross-encoder mean labelled
    /// `FAD`.
    fn rows(&self) -> Vec<(String, Vec<f64>)> {
        let mut rows: Vec<(String, Vec<f64>)> = self
            .encoders
            .iter()
            .filter_map(|enc| {
                let row = self.per_encoder.get(enc)?;
                Some((
                    enc.clone(),
                    self.pairs
                        .iter()
                        .map(|p| row.get(p).map_or(f64::NAN, |s| s.value))
                        .collect(),
                ))
            })
            .collect();
        rows.push((
            "FAD".to_string(),
            self.pairs.iter().map(|p| self.aggregate[p]).collect(),
        ));
        rows
    }
}

pub fn render_report(report: &FadReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Markdown => markdown_table(&report.dataset_id, &report.pairs, &report.rows()),
        ReportFormat::Csv => csv_table(&report.pairs, &report.rows()),
    }
}

fn markdown_table(corner: &str, columns: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    let _ = write!(out, "| {corner} |");
    for c in columns {
        let _ = write!(out, " {c} |");
    }
    out.push_str("\n|---|");
    for _ in columns {
        out.push_str("---:|");
    }
    out.push('\n');
    for (name, values) in rows {
        let _ = write!(out, "| {name} |");
        for v in values {
            let _ = write!(out, " {v:.2} |");
        }
        out.push('\n');
    }
    out
}

fn csv_table(columns: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("source")
        .chain(columns.iter().map(String::as_str))
        .collect();
    writer.write_record(&header).expect("in-memory csv");
    for (name, values) in rows {
        let record: Vec<String> = std::iter::once(name.clone())
            .chain(values.iter().map(|v| v.to_string()))
            .collect();
        writer.write_record(&record).expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// One source's aggregates and, for candidates, their distance to the
/// reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub source: String,
    pub aggregate: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<BTreeMap<String, f64>>,
    /// Mean absolute deviation from the reference across pairs; lower is
    /// closer to the reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realism_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pairs: Vec<String>,
    /// Reference first, then candidates in the order given.
    pub rows: Vec<ComparisonRow>,
}

/// Compares candidate sources against a reference, pair by pair.
pub fn compare_sources(reference: &FadReport, candidates: &[FadReport]) -> Result<ComparisonReport> {
    let mut rows = vec![ComparisonRow {
        source: reference.dataset_id.clone(),
        aggregate: reference.aggregate.clone(),
        deviation: None,
        realism_score: None,
    }];
    for cand in candidates {
        if !cand.aggregate.keys().eq(reference.aggregate.keys()) {
            return Err(Error::PairSetMismatch(format!(
                "{:?} vs reference {:?}",
                cand.dataset_id, reference.dataset_id
            )));
        }
        let deviation: BTreeMap<String, f64> = reference
            .aggregate
            .iter()
            .map(|(pair, r)| (pair.clone(), (cand.aggregate[pair] - r).abs()))
            .collect();
        let realism = deviation.values().sum::<f64>() / deviation.len().max(1) as f64;
        rows.push(ComparisonRow {
            source: cand.dataset_id.clone(),
            aggregate: cand.aggregate.clone(),
            deviation: Some(deviation),
            realism_score: Some(realism),
        });
    }
    Ok(ComparisonReport {
        pairs: reference.pairs.clone(),
        rows,
    })
}

/// Markdown: the aggregate table (reference row first), then a deviation
/// table with the realism score. CSV: the aggregate table only.
pub fn render_comparison(report: &ComparisonReport, format: ReportFormat) -> String {
    let value_rows: Vec<(String, Vec<f64>)> = report
        .rows
        .iter()
        .map(|r| (r.source.clone(), report.pairs.iter().map(|p| r.aggregate[p]).collect()))
        .collect();
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("comparison serializes");
            text.push('\n');
            text
        }
        ReportFormat::Csv => csv_table(&report.pairs, &value_rows),
        ReportFormat::Markdown => {
            let mut out = markdown_table("", &report.pairs, &value_rows);
            let dev_rows: Vec<(String, Vec<f64>)> = report
                .rows
                .iter()
                .filter_map(|r| {
                    let dev = r.deviation.as_ref()?;
                    let mut values: Vec<f64> = report.pairs.iter().map(|p| dev[p]).collect();
                    values.push(r.realism_score?);
                    Some((r.source.clone(), values))
                })
                .collect();
            if !dev_rows.is_empty() {
                let mut columns = report.pairs.clone();
                columns.push("MAD".into());
                out.push('\n');
                out.push_str(&markdown_table("deviation", &columns, &dev_rows));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str, values: &[(&str, f64)]) -> FadReport {
        let row: BTreeMap<String, FadScore> = values
            .iter()
            .map(|(p, v)| {
                (
                    p.to_string(),
                    FadScore {
                        value: *v,
                        encoder_id: "fixture".into(),
                        regularization_applied: false,
                        min_eigenvalue_seen: None,
                    },
                )
            })
            .collect();
        FadReport {
            dataset_id: name.into(),
            pairs: values.iter().map(|(p, _)| p.to_string()).collect(),
            encoders: vec!["fixture".into()],
            per_encoder: BTreeMap::from([("fixture".to_string(), row)]),
            aggregate: values.iter().map(|(p, v)| (p.to_string(), *v)).collect(),
            normalized: false,
        }
    }

    #[test]
    fn aggregate_cases() {
        let m = |v: &[(&str, f64)]| v.iter().map(|(k, x)| (k.to_string(), *x)).collect::<BTreeMap<_, _>>();
        assert_eq!(aggregate_encoders(&m(&[("e1", 2.0), ("e2", 4.0)])).unwrap(), 3.0);
        assert_eq!(aggregate_encoders(&m(&[("e1", 7.5)])).unwrap(), 7.5);
        assert!(matches!(aggregate_encoders(&BTreeMap::new()), Err(Error::EmptyInput)));
    }

    #[test]
    fn comparison_identical_and_published_pair() {
        let reference = fixture("EMOPIA (real)", &[("Q1_Q2", 1.36), ("Q1_Q3", 11.60)]);
        let same = compare_sources(&reference, std::slice::from_ref(&reference)).unwrap();
        assert_eq!(same.rows[1].realism_score, Some(0.0));

        let ours = fixture("Ours (syn.)", &[("Q1_Q2", 1.61), ("Q1_Q3", 33.13)]);
        let cmp = compare_sources(&reference, &[ours]).unwrap();
        let dev = cmp.rows[1].deviation.as_ref().unwrap();
        assert!((dev["Q1_Q2"] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn comparison_rejects_mismatched_pairs() {
        let reference = fixture("r", &[("Q1_Q2", 1.0)]);
        let other = fixture("c", &[("C1_C2", 1.0)]);
        assert!(matches!(
            compare_sources(&reference, &[other]),
            Err(Error::PairSetMismatch(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let r = fixture("set", &[("Q1_Q2", 0.1), ("Q1_Q3", 2.5)]);
        let back = FadReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn markdown_uses_two_decimals() {
        let r = fixture("set", &[("Q1_Q2", 8.6912)]);
        let md = render_report(&r, ReportFormat::Markdown);
        assert!(md.contains("| FAD | 8.69 |"), "{md}");
        assert!(md.starts_with("| set | Q1_Q2 |"));
    }

    #[test]
    fn csv_keeps_full_precision() {
        let r = fixture("set", &[("Q1_Q2", 0.1 + 0.2)]);
        let csv = render_report(&r, ReportFormat::Csv);
        assert_eq!(
            csv,
            "source,Q1_Q2\nfixture,0.30000000000000004\nFAD,0.30000000000000004\n"
        );
    }
}
