use serde::{Deserialize, Serialize};

use super::vector::{FeatureKind, FeatureValue, FeatureVector, FEATURE_KINDS, FEATURE_NAMES, NUM_FEATURES};

/// Per-feature z-score statistics for the numeric features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    /// Feature indices (into the 21-feature schema) that are scaled.
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 for constant features.
    pub std: Vec<f64>,
}

/// Numeric features z-scored, categorical features untouched, both in
/// schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledVector {
    pub numeric: Vec<f64>,
    pub categorical: Vec<String>,
}

fn numeric_indices() -> Vec<usize> {
    (0..NUM_FEATURES)
        .filter(|&i| FEATURE_KINDS[i] == FeatureKind::Numeric)
        .collect()
}

fn num(v: &FeatureVector, i: usize) -> f64 {
    match v.get(i) {
        FeatureValue::Num(x) => x,
        FeatureValue::Cat(_) => unreachable!("feature {i} is categorical"),
    }
}

pub fn fit_scaler<'a, I>(train: I) -> ScalerStats
where
    I: IntoIterator<Item = &'a FeatureVector>,
{
    let indices = numeric_indices();
    let k = indices.len();
    let mut n = 0usize;
    let mut sum = vec![0.0; k];
    let rows: Vec<&FeatureVector> = train.into_iter().collect();
    for v in &rows {
        n += 1;
        for (j, &i) in indices.iter().enumerate() {
            sum[j] += num(v, i);
        }
    }
    let nf = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    // Two-pass variance for accuracy.
    let mut ss = vec![0.0; k];
    for v in &rows {
        for (j, &i) in indices.iter().enumerate() {
            let d = num(v, i) - mean[j];
            ss[j] += d * d;
        }
    }
    let std = ss
        .iter()
        .map(|s| {
            let sd = (s / nf).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    ScalerStats {
        names: indices.iter().map(|&i| FEATURE_NAMES[i].to_string()).collect(),
        indices,
        mean,
        std,
    }
}

impl ScalerStats {
    /// Scales the value of the `j`-th numeric feature.
    pub fn scale(&self, j: usize, x: f64) -> f64 {
        (x - self.mean[j]) / self.std[j]
    }
}

pub fn apply_scaler(stats: &ScalerStats, v: &FeatureVector) -> ScaledVector {
    let numeric = stats
        .indices
        .iter()
        .enumerate()
        .map(|(j, &i)| stats.scale(j, num(v, i)))
        .collect();
    let categorical = (0..NUM_FEATURES)
        .filter_map(|i| match v.get(i) {
            FeatureValue::Cat(s) => Some(s.to_string()),
            FeatureValue::Num(_) => None,
        })
        .collect();
    ScaledVector { numeric, categorical }
}
