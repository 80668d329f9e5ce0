use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MANIFEST_COLUMNS: [&str; 4] = ["clip_id", "valence", "arousal", "label"];

/// One annotated clip. Valence and arousal live in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    /// Quadrant (`Q1`..`Q4`), mood cluster (`C1`..`C5`) or any free tag.
    pub label: Option<String>,
}

impl ClipRecord {
    /// Both coordinates, when the record has a complete VA pair.
    pub fn va(&self) -> Option<(f64, f64)> {
        self.valence.zip(self.arousal)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ClipRecord>,
    /// encoder id -> embedding file
    pub embedding_sources: BTreeMap<String, PathBuf>,
}

impl DatasetManifest {
    pub fn new(records: Vec<ClipRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.clip_id.as_str()) {
                return Err(Error::DuplicateClipId(r.clip_id.clone()));
            }
        }
        Ok(DatasetManifest {
            records,
            embedding_sources: BTreeMap::new(),
        })
    }

    pub fn clip_ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.clip_id.as_str())
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

/// Parses manifest CSV (`clip_id,valence,arousal,label`); empty cells are
/// absent values.
pub fn parse_manifest(bytes: &[u8]) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let [id_col, v_col, a_col, label_col] = columns;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let cell = |i: usize| row.get(i).filter(|s| !s.is_empty());
        let clip_id = cell(id_col)
            .ok_or_else(|| Error::Parse(format!("empty clip_id in row {:?}", row.position())))?
            .to_string();
        let valence = parse_unit(&clip_id, "valence", cell(v_col))?;
        let arousal = parse_unit(&clip_id, "arousal", cell(a_col))?;
        let label = cell(label_col).map(str::to_string);
        let record = ClipRecord {
            clip_id,
            valence,
            arousal,
            label,
        };
        if record.va().is_none() && record.label.is_none() {
            return Err(Error::IncompleteRecord(record.clip_id));
        }
        records.push(record);
    }
    DatasetManifest::new(records)
}

fn parse_unit(clip: &str, field: &'static str, cell: Option<&str>) -> Result<Option<f64>> {
    let Some(text) = cell else { return Ok(None) };
    let value: f64 = text
        .parse()
        .map_err(|_| Error::Parse(format!("{field} {text:?} for clip {clip:?}")))?;
    if !(-1.0..=1.0).contains(&value) {
        return Err(Error::ValueOutOfRange {
            clip: clip.to_string(),
            field,
            value,
        });
    }
    Ok(Some(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> Result<DatasetManifest> {
        parse_manifest(format!("clip_id,valence,arousal,label\n{body}").as_bytes())
    }

    #[test]
    fn va_row_without_label() {
        let m = parse("clip7,0.8,0.8,\n").unwrap();
        assert_eq!(
            m.records[0],
            ClipRecord {
                clip_id: "clip7".into(),
                valence: Some(0.8),
                arousal: Some(0.8),
                label: None
            }
        );
    }

    #[test]
    fn label_row_without_va() {
        let m = parse("clip8,,,Q2\n").unwrap();
        let r = &m.records[0];
        assert_eq!(r.label.as_deref(), Some("Q2"));
        assert_eq!(r.valence, None);
        assert_eq!(r.arousal, None);
    }

    #[test]
    fn duplicate_ids() {
        assert!(matches!(
            parse("x,0.1,0.1,\nx,0.2,0.2,\n"),
            Err(Error::DuplicateClipId(id)) if id == "x"
        ));
    }

    #[test]
    fn missing_column() {
        let err = parse_manifest(b"clip_id,valence,label\na,0.1,Q1\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "arousal"));
    }

    #[test]
    fn out_of_range_va() {
        assert!(matches!(
            parse("a,1.5,0.0,\n"),
            Err(Error::ValueOutOfRange { field: "valence", .. })
        ));
        assert!(matches!(
            parse("a,0.0,-1.01,\n"),
            Err(Error::ValueOutOfRange { field: "arousal", .. })
        ));
    }

    #[test]
    fn record_needs_va_pair_or_label() {
        assert!(matches!(parse("a,0.3,,\n"), Err(Error::IncompleteRecord(_))));
        assert!(parse("a,0.3,,C2\n").is_ok());
    }

    #[test]
    fn column_order_is_taken_from_header() {
        let m = parse_manifest(b"label,arousal,valence,clip_id\nC3,0.5,-0.5,z\n").unwrap();
        let r = &m.records[0];
        assert_eq!(r.va(), Some((-0.5, 0.5)));
        assert_eq!(r.label.as_deref(), Some("C3"));
    }
}
