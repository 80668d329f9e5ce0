//! Emotion-recognition metrics: R^2 for valence/arousal regression,
//! weighted/unweighted accuracy and macro F1 for categorical labels.
//!
//! "Weighted" accuracy is overall (micro) accuracy; "unweighted" accuracy is
//! the mean per-class recall over the classes present in the ground truth.

pub mod probe;

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEval {
    targets: Vec<f64>,
    predictions: Vec<f64>,
}

impl RegressionEval {
    pub fn new(targets: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        if targets.len() != predictions.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                found: predictions.len(),
            });
        }
        if targets.len() < 2 {
            return Err(Error::InsufficientSamples {
                required: 2,
                count: targets.len(),
            });
        }
        if let Some(row) = targets
            .iter()
            .zip(&predictions)
            .position(|(t, p)| !t.is_finite() || !p.is_finite())
        {
            return Err(Error::NonFinite { row });
        }
        Ok(RegressionEval { targets, predictions })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }
}

/// Coefficient of determination `1 - SS_res / SS_tot`. At most 1, unbounded
/// below.
pub fn r_squared(eval: &RegressionEval) -> Result<f64> {
    let n = eval.targets.len() as f64;
    let mean = eval.targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = eval.targets.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = eval
        .targets
        .iter()
        .zip(&eval.predictions)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationEval<L> {
    true_labels: Vec<L>,
    predicted_labels: Vec<L>,
}

impl<L: Ord + Clone> ClassificationEval<L> {
    pub fn new(true_labels: Vec<L>, predicted_labels: Vec<L>) -> Result<Self> {
        if true_labels.len() != predicted_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: true_labels.len(),
                found: predicted_labels.len(),
            });
        }
        if true_labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(ClassificationEval {
            true_labels,
            predicted_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    fn counts(&self) -> ClassCounts<'_, L> {
        let mut c = ClassCounts {
            support: BTreeMap::new(),
            predicted: BTreeMap::new(),
            correct: BTreeMap::new(),
        };
        for (t, p) in self.true_labels.iter().zip(&self.predicted_labels) {
            *c.support.entry(t).or_default() += 1;
            *c.predicted.entry(p).or_default() += 1;
            if t == p {
                *c.correct.entry(t).or_default() += 1;
            }
        }
        c
    }
}

struct ClassCounts<'a, L> {
    support: BTreeMap<&'a L, usize>,
    predicted: BTreeMap<&'a L, usize>,
    correct: BTreeMap<&'a L, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyMode {
    /// Fraction of all examples classified correctly.
    Weighted,
    /// Mean of per-class recall.
    Unweighted,
}

pub fn accuracy<L: Ord + Clone>(eval: &ClassificationEval<L>, mode: AccuracyMode) -> f64 {
    let counts = eval.counts();
    match mode {
        AccuracyMode::Weighted => counts.correct.values().sum::<usize>() as f64 / eval.len() as f64,
        AccuracyMode::Unweighted => {
            let recall_sum: f64 = counts
                .support
                .iter()
                .map(|(class, &n)| counts.correct.get(class).copied().unwrap_or(0) as f64 / n as f64)
                .sum();
            recall_sum / counts.support.len() as f64
        }
    }
}

/// Macro-averaged F1 over every class seen in either label list. A class
/// whose precision and recall are both zero (or undefined) scores 0.
pub fn f1_score<L: Ord + Clone>(eval: &ClassificationEval<L>) -> f64 {
    let counts = eval.counts();
    let classes: BTreeSet<&L> = counts.support.keys().chain(counts.predicted.keys()).copied().collect();
    let total: f64 = classes
        .iter()
        .map(|class| {
            let tp = counts.correct.get(class).copied().unwrap_or(0) as f64;
            let support = counts.support.get(class).copied().unwrap_or(0) as f64;
            let predicted = counts.predicted.get(class).copied().unwrap_or(0) as f64;
            // 2PR / (P + R) == 2 tp / (support + predicted)
            let denom = support + predicted;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .sum();
    total / classes.len() as f64
}

/// Which score a probe run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMetric {
    R2,
    Wa,
    Ua,
    F1,
}

impl ProbeMetric {
    pub fn is_regression(self) -> bool {
        self == ProbeMetric::R2
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeMetric::R2 => "r2",
            ProbeMetric::Wa => "wa",
            ProbeMetric::Ua => "ua",
            ProbeMetric::F1 => "f1",
        }
    }
}

impl FromStr for ProbeMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "r2" => Ok(ProbeMetric::R2),
            "wa" => Ok(ProbeMetric::Wa),
            "ua" => Ok(ProbeMetric::Ua),
            "f1" => Ok(ProbeMetric::F1),
            other => Err(format!("unknown metric {other:?} (r2|wa|ua|f1)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(t: &[f64], p: &[f64]) -> RegressionEval {
        RegressionEval::new(t.to_vec(), p.to_vec()).unwrap()
    }

    fn cls(t: &[&'static str], p: &[&'static str]) -> ClassificationEval<&'static str> {
        ClassificationEval::new(t.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn r_squared_cases() {
        assert_eq!(r_squared(&reg(&[0.3, -0.2, 0.9], &[0.3, -0.2, 0.9])).unwrap(), 1.0);
        assert_eq!(r_squared(&reg(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0])).unwrap(), 0.0);
        assert!((r_squared(&reg(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!(r_squared(&reg(&[0.0, 1.0], &[5.0, -5.0])).unwrap() < 0.0);
        assert!(matches!(
            r_squared(&reg(&[1.0, 1.0], &[0.0, 2.0])),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn regression_eval_validation() {
        assert!(RegressionEval::new(vec![1.0], vec![1.0]).is_err());
        assert!(RegressionEval::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(RegressionEval::new(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn accuracy_cases() {
        let all = cls(&["A", "B", "C"], &["A", "B", "C"]);
        assert_eq!(accuracy(&all, AccuracyMode::Weighted), 1.0);
        assert_eq!(accuracy(&all, AccuracyMode::Unweighted), 1.0);

        let imbalanced = cls(&["A", "A", "A", "B"], &["A", "A", "A", "A"]);
        assert_eq!(accuracy(&imbalanced, AccuracyMode::Weighted), 0.75);
        assert_eq!(accuracy(&imbalanced, AccuracyMode::Unweighted), 0.5);

        let swapped = cls(&["A", "B"], &["B", "A"]);
        assert_eq!(accuracy(&swapped, AccuracyMode::Weighted), 0.0);
        assert_eq!(accuracy(&swapped, AccuracyMode::Unweighted), 0.0);
    }

    #[test]
    fn f1_cases() {
        let five = ["C1", "C2", "C3", "C4", "C5"];
        assert_eq!(f1_score(&cls(&five, &five)), 1.0);

        let f = f1_score(&cls(&["A", "A", "B", "B"], &["A", "B", "B", "B"]));
        assert!((f - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);

        let f = f1_score(&cls(&["A", "A", "B", "B"], &["A", "A", "A", "A"]));
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn classification_eval_validation() {
        assert!(ClassificationEval::<u8>::new(vec![], vec![]).is_err());
        assert!(ClassificationEval::new(vec![1], vec![1, 2]).is_err());
    }
}
