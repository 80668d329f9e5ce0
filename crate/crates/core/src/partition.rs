//! Valence/arousal quadrants, clip grouping and group-pair enumeration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::Q1 => "Q1",
            Quadrant::Q2 => "Q2",
            Quadrant::Q3 => "Q3",
            Quadrant::Q4 => "Q4",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quadrant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "Q1" => Ok(Quadrant::Q1),
            "Q2" => Ok(Quadrant::Q2),
            "Q3" => Ok(Quadrant::Q3),
            "Q4" => Ok(Quadrant::Q4),
            _ => Err(format!("unknown quadrant {s:?} (Q1..Q4)")),
        }
    }
}

/// How quadrant numbers map onto valence/arousal sign cells.
///
/// | cell   | emomusic | russell |
/// |--------|----------|---------|
/// | -V, +A | Q1       | Q2      |
/// | -V, -A | Q2       | Q3      |
/// | +V, +A | Q3       | Q1      |
/// | +V, -A | Q4       | Q4      |
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadrantConvention {
    /// Numbering used on the recognition side.
    #[default]
    EmoMusic,
    /// Circumplex numbering (counter-clockwise from +V+A), used on the
    /// generation side.
    Russell,
}

impl QuadrantConvention {
    /// Quadrant of a sign cell; `true` means non-negative.
    pub fn quadrant(self, valence_pos: bool, arousal_pos: bool) -> Quadrant {
        use Quadrant::*;
        match (self, valence_pos, arousal_pos) {
            (QuadrantConvention::EmoMusic, false, true) => Q1,
            (QuadrantConvention::EmoMusic, false, false) => Q2,
            (QuadrantConvention::EmoMusic, true, true) => Q3,
            (QuadrantConvention::EmoMusic, true, false) => Q4,
            (QuadrantConvention::Russell, true, true) => Q1,
            (QuadrantConvention::Russell, false, true) => Q2,
            (QuadrantConvention::Russell, false, false) => Q3,
            (QuadrantConvention::Russell, true, false) => Q4,
        }
    }

    /// Sign cell `(valence_pos, arousal_pos)` of a quadrant.
    pub fn signs(self, quadrant: Quadrant) -> (bool, bool) {
        [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .find(|&(v, a)| self.quadrant(v, a) == quadrant)
            .expect("every quadrant has a cell")
    }
}

impl FromStr for QuadrantConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "emomusic" => Ok(QuadrantConvention::EmoMusic),
            "russell" => Ok(QuadrantConvention::Russell),
            other => Err(format!("unknown convention {other:?} (emomusic|russell)")),
        }
    }
}

impl fmt::Display for QuadrantConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadrantConvention::EmoMusic => "emomusic",
            QuadrantConvention::Russell => "russell",
        })
    }
}

/// Zero counts as positive.
pub fn va_to_quadrant(valence: f64, arousal: f64, convention: QuadrantConvention) -> Result<Quadrant> {
    if !valence.is_finite() || !arousal.is_finite() {
        return Err(Error::NonFinite { row: 0 });
    }
    Ok(convention.quadrant(valence >= 0.0, arousal >= 0.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GroupBy {
    /// Derive `Q1..Q4` from each clip's valence/arousal.
    #[default]
    Quadrant,
    /// Use the manifest's `label` column verbatim.
    Label,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "quadrant" => Ok(GroupBy::Quadrant),
            "label" => Ok(GroupBy::Label),
            other => Err(format!("unknown grouping {other:?} (quadrant|label)")),
        }
    }
}

/// Disjoint groups of clip ids keyed by label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    pub groups: BTreeMap<String, Vec<String>>,
    /// Set when groups were derived from valence/arousal.
    pub convention: Option<QuadrantConvention>,
}

impl GroupPartition {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn clip_count(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }
}

/// Assigns every manifest record to one group. Fails with the full list of
/// clips that lack what the chosen grouping needs.
pub fn partition(manifest: &DatasetManifest, by: GroupBy, convention: QuadrantConvention) -> Result<GroupPartition> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut missing = Vec::new();
    for record in &manifest.records {
        let label = match by {
            GroupBy::Quadrant => match record.va() {
                Some((v, a)) => Some(va_to_quadrant(v, a, convention)?.to_string()),
                None => None,
            },
            GroupBy::Label => record.label.clone(),
        };
        match label {
            Some(l) => groups.entry(l).or_default().push(record.clip_id.clone()),
            None => missing.push(record.clip_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingLabel(missing));
    }
    Ok(GroupPartition {
        groups,
        convention: (by == GroupBy::Quadrant).then_some(convention),
    })
}

/// An unordered pair of group labels, stored in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupPair {
    pub first: String,
    pub second: String,
}

impl GroupPair {
    pub fn label(&self) -> String {
        format!("{}_{}", self.first, self.second)
    }
}

impl fmt::Display for GroupPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.first, self.second)
    }
}

/// All `k (k - 1) / 2` unordered pairs, sorted lexicographically.
pub fn enumerate_pairs(partition: &GroupPartition) -> Result<Vec<GroupPair>> {
    let labels: Vec<&String> = partition.groups.keys().collect();
    if labels.len() < 2 {
        return Err(Error::TooFewGroups(labels.len()));
    }
    let mut pairs = Vec::with_capacity(labels.len() * (labels.len() - 1) / 2);
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            pairs.push(GroupPair {
                first: (*a).clone(),
                second: (*b).clone(),
            });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{ClipRecord, DatasetManifest};

    fn va(id: &str, v: f64, a: f64) -> ClipRecord {
        ClipRecord {
            clip_id: id.into(),
            valence: Some(v),
            arousal: Some(a),
            label: None,
        }
    }

    fn labelled(id: &str, label: &str) -> ClipRecord {
        ClipRecord {
            clip_id: id.into(),
            valence: None,
            arousal: None,
            label: Some(label.into()),
        }
    }

    #[test]
    fn quadrant_examples() {
        use QuadrantConvention::*;
        assert_eq!(va_to_quadrant(-0.5, 0.7, EmoMusic).unwrap(), Quadrant::Q1);
        assert_eq!(va_to_quadrant(0.3, 0.9, EmoMusic).unwrap(), Quadrant::Q3);
        assert_eq!(va_to_quadrant(0.8, 0.8, Russell).unwrap(), Quadrant::Q1);
        assert_eq!(va_to_quadrant(0.0, 0.5, EmoMusic).unwrap(), Quadrant::Q3);
        assert!(va_to_quadrant(f64::NAN, 0.5, EmoMusic).is_err());
    }

    #[test]
    fn full_convention_tables() {
        use Quadrant::*;
        let cells = [(-1.0, 1.0), (-1.0, -1.0), (1.0, 1.0), (1.0, -1.0)];
        let emo: Vec<_> = cells
            .iter()
            .map(|&(v, a)| va_to_quadrant(v, a, QuadrantConvention::EmoMusic).unwrap())
            .collect();
        assert_eq!(emo, vec![Q1, Q2, Q3, Q4]);
        let rus: Vec<_> = cells
            .iter()
            .map(|&(v, a)| va_to_quadrant(v, a, QuadrantConvention::Russell).unwrap())
            .collect();
        assert_eq!(rus, vec![Q2, Q3, Q1, Q4]);
    }

    #[test]
    fn signs_invert_quadrant() {
        for conv in [QuadrantConvention::EmoMusic, QuadrantConvention::Russell] {
            for q in Quadrant::ALL {
                let (v, a) = conv.signs(q);
                assert_eq!(conv.quadrant(v, a), q);
            }
        }
    }

    #[test]
    fn one_record_per_cell_gives_four_singletons() {
        let m = DatasetManifest::new(vec![
            va("a", -0.5, 0.5),
            va("b", -0.5, -0.5),
            va("c", 0.5, 0.5),
            va("d", 0.5, -0.5),
        ])
        .unwrap();
        let p = partition(&m, GroupBy::Quadrant, QuadrantConvention::EmoMusic).unwrap();
        assert_eq!(p.labels().collect::<Vec<_>>(), ["Q1", "Q2", "Q3", "Q4"]);
        assert!(p.groups.values().all(|g| g.len() == 1));
        assert_eq!(p.groups["Q1"], vec!["a".to_string()]);
        assert_eq!(p.convention, Some(QuadrantConvention::EmoMusic));
    }

    #[test]
    fn explicit_cluster_labels() {
        let recs = (1..=5)
            .map(|c| labelled(&format!("clip{c}"), &format!("C{c}")))
            .collect();
        let m = DatasetManifest::new(recs).unwrap();
        let p = partition(&m, GroupBy::Label, QuadrantConvention::EmoMusic).unwrap();
        assert_eq!(p.groups.len(), 5);
        assert_eq!(p.convention, None);
    }

    #[test]
    fn missing_va_reports_clip_ids() {
        let m = DatasetManifest::new(vec![va("a", 0.1, 0.1), labelled("b", "Q2"), labelled("c", "Q3")]).unwrap();
        match partition(&m, GroupBy::Quadrant, QuadrantConvention::EmoMusic) {
            Err(Error::MissingLabel(ids)) => assert_eq!(ids, vec!["b", "c"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            partition(&m, GroupBy::Label, QuadrantConvention::EmoMusic),
            Err(Error::MissingLabel(ids)) if ids == vec!["a"]
        ));
    }

    fn partition_of(labels: &[&str]) -> GroupPartition {
        GroupPartition {
            groups: labels
                .iter()
                .map(|l| (l.to_string(), vec![format!("{l}-clip")]))
                .collect(),
            convention: None,
        }
    }

    #[test]
    fn quadrant_pairs() {
        let pairs: Vec<String> = enumerate_pairs(&partition_of(&["Q3", "Q1", "Q4", "Q2"]))
            .unwrap()
            .iter()
            .map(GroupPair::label)
            .collect();
        assert_eq!(pairs, ["Q1_Q2", "Q1_Q3", "Q1_Q4", "Q2_Q3", "Q2_Q4", "Q3_Q4"]);
    }

    #[test]
    fn cluster_pairs() {
        let pairs: Vec<String> = enumerate_pairs(&partition_of(&["C1", "C2", "C3", "C4", "C5"]))
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(
            pairs,
            ["C1_C2", "C1_C3", "C1_C4", "C1_C5", "C2_C3", "C2_C4", "C2_C5", "C3_C4", "C3_C5", "C4_C5"]
        );
    }

    #[test]
    fn single_group_has_no_pairs() {
        assert!(matches!(
            enumerate_pairs(&partition_of(&["Q1"])),
            Err(Error::TooFewGroups(1))
        ));
    }
}
