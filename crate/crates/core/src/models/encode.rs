//! Numeric matrices for tree training: category dictionaries, the scaled
//! design matrix and histogram bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::scaler::{apply_scaler, fit_scaler, ScalerStats};
use crate::extractor::vector::{FeatureKind, FeatureValue, FeatureVector, FEATURE_KINDS, FEATURE_NAMES, NUM_FEATURES};

/// Code reserved for categories never seen in training.
pub const UNSEEN: u32 = 0;

/// Sorted category values of one feature; value `i` has code `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDict {
    pub feature: String,
    pub categories: Vec<String>,
}

impl CategoryDict {
    pub fn code(&self, value: &str) -> u32 {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(value))
            .map_or(UNSEEN, |i| i as u32 + 1)
    }

    /// Number of codes including UNSEEN.
    pub fn cardinality(&self) -> usize {
        self.categories.len() + 1
    }
}

/// Column-major training matrix: scaled numerics and category codes as f64.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub kinds: Vec<FeatureKind>,
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn new(kinds: Vec<FeatureKind>, columns: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Dataset> {
        if kinds.len() != columns.len() {
            return Err(Error::LengthMismatch(kinds.len(), columns.len()));
        }
        for c in &columns {
            if c.len() != labels.len() {
                return Err(Error::LengthMismatch(c.len(), labels.len()));
            }
        }
        for (k, c) in kinds.iter().zip(&columns) {
            if *k == FeatureKind::Categorical && c.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
                return Err(Error::InvalidParameter(
                    "category codes must be non-negative integers".into(),
                ));
            }
        }
        Ok(Dataset { kinds, columns, labels })
    }

    /// Convenience constructor from row-major numeric features.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<Dataset> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch(r.len(), d));
        }
        let columns = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Dataset::new(vec![FeatureKind::Numeric; d], columns, labels.to_vec())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn check_both_classes(&self) -> Result<()> {
        let pos = self.labels.iter().filter(|&&y| y).count();
        if self.labels.is_empty() || pos == 0 || pos == self.labels.len() {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

/// Histogram view of a dataset. Numeric values map to at most `max_bins`
/// ordered bins; category codes are their own bins.
#[derive(Debug, Clone)]
pub struct Binned {
    pub bins: Vec<Vec<u32>>,
    pub n_bins: Vec<usize>,
    /// Numeric features: bin `b` holds values `<= cuts[b]` (and above the
    /// previous cut). Empty for categorical features.
    pub cuts: Vec<Vec<f64>>,
    pub kinds: Vec<FeatureKind>,
}

fn numeric_cuts(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut uniq: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    if uniq.len() <= 1 {
        return vec![f64::INFINITY];
    }
    let boundaries: Vec<usize> = if uniq.len() <= max_bins {
        (0..uniq.len() - 1).collect()
    } else {
        // Equal-count over distinct values.
        let mut b: Vec<usize> = (1..max_bins).map(|k| k * uniq.len() / max_bins - 1).collect();
        b.dedup();
        b
    };
    let mut cuts: Vec<f64> = boundaries
        .iter()
        .map(|&i| uniq[i] + (uniq[i + 1] - uniq[i]) / 2.0)
        .collect();
    cuts.push(f64::INFINITY);
    cuts
}

fn bin_of(cuts: &[f64], x: f64) -> u32 {
    if x.is_nan() {
        return (cuts.len() - 1) as u32;
    }
    cuts.partition_point(|&c| c < x) as u32
}

impl Binned {
    pub fn new(data: &Dataset, max_bins: usize) -> Binned {
        let max_bins = max_bins.clamp(2, 65_536);
        let mut out = Binned {
            bins: Vec::with_capacity(data.n_features()),
            n_bins: Vec::with_capacity(data.n_features()),
            cuts: Vec::with_capacity(data.n_features()),
            kinds: data.kinds.clone(),
        };
        for (kind, col) in data.kinds.iter().zip(&data.columns) {
            match kind {
                FeatureKind::Numeric => {
                    let cuts = numeric_cuts(col, max_bins);
                    out.bins.push(col.iter().map(|&x| bin_of(&cuts, x)).collect());
                    out.n_bins.push(cuts.len());
                    out.cuts.push(cuts);
                }
                FeatureKind::Categorical => {
                    let bins: Vec<u32> = col.iter().map(|&x| x as u32).collect();
                    out.n_bins.push(bins.iter().max().map_or(1, |&m| m as usize + 1));
                    out.bins.push(bins);
                    out.cuts.push(Vec::new());
                }
            }
        }
        out
    }
}

/// Feature schema plus the fitted scaler and category dictionaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    pub scaler: ScalerStats,
    pub dictionaries: Vec<CategoryDict>,
}

impl Encoder {
    pub fn fit<'a, I>(train: I) -> Encoder
    where
        I: IntoIterator<Item = &'a FeatureVector> + Clone,
    {
        let scaler = fit_scaler(train.clone());
        let mut dictionaries: Vec<CategoryDict> = (0..NUM_FEATURES)
            .filter(|&i| FEATURE_KINDS[i] == FeatureKind::Categorical)
            .map(|i| CategoryDict {
                feature: FEATURE_NAMES[i].to_string(),
                categories: Vec::new(),
            })
            .collect();
        for v in train {
            let mut k = 0;
            for i in 0..NUM_FEATURES {
                if let FeatureValue::Cat(s) = v.get(i) {
                    dictionaries[k].categories.push(s.to_string());
                    k += 1;
                }
            }
        }
        for d in &mut dictionaries {
            d.categories.sort();
            d.categories.dedup();
        }
        Encoder {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            feature_kinds: FEATURE_KINDS.to_vec(),
            scaler,
            dictionaries,
        }
    }

    /// Checks the encoder was built for the current 21-feature schema.
    pub fn check_schema(&self) -> Result<()> {
        if self.feature_names.len() != NUM_FEATURES || self.feature_names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(Error::Schema(format!(
                "model features [{}] differ from the extractor's",
                self.feature_names.join(", ")
            )));
        }
        if self.feature_kinds != FEATURE_KINDS {
            return Err(Error::Schema("feature kinds differ from the extractor's".into()));
        }
        let n_cat = FEATURE_KINDS.iter().filter(|k| **k == FeatureKind::Categorical).count();
        if self.dictionaries.len() != n_cat || self.scaler.indices.len() != NUM_FEATURES - n_cat {
            return Err(Error::Schema(
                "scaler or dictionaries do not match the feature kinds".into(),
            ));
        }
        Ok(())
    }

    /// One row in schema order: scaled numerics, category codes.
    pub fn encode(&self, v: &FeatureVector) -> Vec<f64> {
        let scaled = apply_scaler(&self.scaler, v);
        let (mut n, mut c) = (0, 0);
        (0..NUM_FEATURES)
            .map(|i| match FEATURE_KINDS[i] {
                FeatureKind::Numeric => {
                    n += 1;
                    scaled.numeric[n - 1]
                }
                FeatureKind::Categorical => {
                    c += 1;
                    f64::from(self.dictionaries[c - 1].code(&scaled.categorical[c - 1]))
                }
            })
            .collect()
    }

    pub fn dataset(&self, rows: &[FeatureVector], labels: &[bool]) -> Result<Dataset> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch(rows.len(), labels.len()));
        }
        let mut columns: Vec<Vec<f64>> = (0..NUM_FEATURES).map(|_| Vec::with_capacity(rows.len())).collect();
        for v in rows {
            for (col, x) in columns.iter_mut().zip(self.encode(v)) {
                col.push(x);
            }
        }
        Dataset::new(FEATURE_KINDS.to_vec(), columns, labels.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuts_separate_distinct_values() {
        let cuts = numeric_cuts(&[3.0, 1.0, 2.0, 2.0], 255);
        assert_eq!(cuts, vec![1.5, 2.5, f64::INFINITY]);
        assert_eq!(bin_of(&cuts, 1.0), 0);
        assert_eq!(bin_of(&cuts, 2.0), 1);
        assert_eq!(bin_of(&cuts, 9.0), 2);
    }

    #[test]
    fn many_values_are_capped() {
        let values: Vec<f64> = (0..10_000).map(f64::from).collect();
        let cuts = numeric_cuts(&values, 255);
        assert!(cuts.len() <= 255);
        let bins: Vec<u32> = values.iter().map(|&x| bin_of(&cuts, x)).collect();
        assert!(bins.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unseen_category_gets_reserved_code() {
        let d = CategoryDict {
            feature: "f".into(),
            categories: vec!["a".into(), "c".into()],
        };
        assert_eq!(d.code("a"), 1);
        assert_eq!(d.code("c"), 2);
        assert_eq!(d.code("b"), UNSEEN);
    }
}
