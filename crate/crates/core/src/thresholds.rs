//! Confusion metrics and threshold selection over a fixed candidate grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ten candidates 0.05, 0.10, ..., 0.50.
pub fn candidates() -> [f64; 10] {
    std::array::from_fn(|i| (i + 1) as f64 / 20.0)
}

/// Used when tuning is skipped.
pub const DEFAULT_FIXED_THRESHOLD: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Result<Confusion> {
        if predicted.len() != actual.len() {
            return Err(Error::LengthMismatch(predicted.len(), actual.len()));
        }
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            c.add(p, a);
        }
        Ok(c)
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn tpr(&self) -> f64 {
        self.recall()
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Youden's J: TPR − FPR.
    pub fn youden_j(&self) -> f64 {
        self.tpr() - self.fpr()
    }
}

/// Predicted killed iff `score >= theta`.
pub fn confusion(scores: &[f64], labels: &[bool], theta: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        c.add(s >= theta, y);
    }
    Ok(c)
}

pub fn classify(scores: &[f64], theta: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= theta).collect()
}

/// Population z-scores; a constant series maps to zeros.
pub fn zscore(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        vec![0.0; xs.len()]
    } else {
        xs.iter().map(|x| (x - mean) / sd).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    #[default]
    Tuned,
    Fixed {
        theta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub candidates: Vec<f64>,
    pub confusion: Vec<Confusion>,
    pub f1: Vec<f64>,
    pub j: Vec<f64>,
    pub f1_standardized: Vec<f64>,
    pub j_standardized: Vec<f64>,
    pub combined: Vec<f64>,
    pub selected: f64,
}

/// Index of the largest value; the first one on ties.
pub fn first_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn optimize_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdReport> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::NotAProbability(s));
    }
    let cands = candidates();
    let confusion: Vec<Confusion> = cands
        .iter()
        .map(|&t| confusion(scores, labels, t))
        .collect::<Result<_>>()?;
    let f1: Vec<f64> = confusion.iter().map(Confusion::f1).collect();
    let j: Vec<f64> = confusion.iter().map(Confusion::youden_j).collect();
    let f1_standardized = zscore(&f1);
    let j_standardized = zscore(&j);
    let combined: Vec<f64> = f1_standardized
        .iter()
        .zip(&j_standardized)
        .map(|(a, b)| a + b)
        .collect();
    let selected = cands[first_argmax(&combined)];
    Ok(ThresholdReport {
        candidates: cands.to_vec(),
        confusion,
        f1,
        j,
        f1_standardized,
        j_standardized,
        combined,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid() {
        let c = candidates();
        assert_eq!(c[0], 0.05);
        assert_eq!(c[6], 0.35);
        assert_eq!(c[9], 0.5);
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[0.9, 0.1], &[true, false], 0.5).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 1, 0, 0));
        let c = confusion(&[0.2, 0.1, 0.7], &[false, false, true], 0.0).unwrap();
        assert_eq!(c.fp, 2);
        assert_eq!(classify(&[0.35], 0.35), vec![true]);
        assert!(confusion(&[0.1], &[], 0.5).is_err());
    }

    #[test]
    fn metric_examples() {
        let c = Confusion {
            tp: 3,
            fp: 1,
            fn_: 3,
            tn: 0,
        };
        assert_eq!(c.precision(), 0.75);
        let c = Confusion {
            tp: 1,
            fp: 1,
            fn_: 1,
            tn: 1,
        };
        assert_eq!(c.f1(), 0.5);
        let c = Confusion {
            tp: 4,
            fp: 0,
            fn_: 0,
            tn: 4,
        };
        assert_eq!(c.youden_j(), 1.0);
        assert_eq!(Confusion::default().f1(), 0.0);
    }

    #[test]
    fn identical_metrics_pick_smallest() {
        // Every candidate classifies identically.
        let r = optimize_threshold(&[0.9, 0.01], &[true, false]).unwrap();
        assert_eq!(r.selected, 0.05);
        assert!(r.combined.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn dominant_candidate_wins() {
        // Positives score in [0.35, 0.40), negatives in [0.30, 0.35).
        let scores = [0.36, 0.37, 0.38, 0.31, 0.32, 0.33];
        let labels = [true, true, true, false, false, false];
        assert_eq!(optimize_threshold(&scores, &labels).unwrap().selected, 0.35);
    }

    #[test]
    fn single_class_validation_is_rejected() {
        assert!(matches!(optimize_threshold(&[0.2], &[true]), Err(Error::SingleClass)));
    }
}
