//! The forest/booster pair, probability fusion, persistence and
//! importance reporting.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::booster::{train_booster, Booster, BoosterConfig};
use super::encode::{Binned, Encoder};
use super::forest::{train_forest, Forest, ForestConfig};
use crate::error::{Error, Result};
use crate::extractor::vector::{FeatureVector, NUM_FEATURES};
use crate::io::{read_to_string, write_atomic};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub forest: ForestConfig,
    pub booster: BoosterConfig,
    pub max_bins: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            forest: ForestConfig::default(),
            booster: BoosterConfig::default(),
            max_bins: 255,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemblePair {
    pub format_version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub encoder: Encoder,
    pub forest: Forest,
    pub booster: Booster,
}

/// Arithmetic mean of the two model probabilities.
pub fn combine(p_rf: f64, p_gbdt: f64) -> Result<f64> {
    for p in [p_rf, p_gbdt] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NotAProbability(p));
        }
    }
    Ok((p_rf + p_gbdt) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub forest: f64,
    pub booster: f64,
    pub combined: f64,
}

impl TreeEnsemblePair {
    /// Fits the encoder on `rows` and trains both models on the same matrix.
    pub fn train(rows: &[FeatureVector], labels: &[bool], config: &ModelConfig, seed: u64) -> Result<TreeEnsemblePair> {
        let encoder = Encoder::fit(rows);
        let data = encoder.dataset(rows, labels)?;
        data.check_both_classes()?;
        let binned = Binned::new(&data, config.max_bins);
        let forest = train_forest(&data, &binned, &config.forest, seed)?;
        let booster = train_booster(&data, &binned, &config.booster)?;
        Ok(TreeEnsemblePair {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            seed,
            encoder,
            forest,
            booster,
        })
    }

    pub fn predict_encoded(&self, x: &[f64]) -> Prediction {
        let forest = self.forest.predict(x);
        let booster = self.booster.predict(x);
        Prediction {
            forest,
            booster,
            combined: (forest + booster) / 2.0,
        }
    }

    pub fn predict(&self, v: &FeatureVector) -> Prediction {
        self.predict_encoded(&self.encoder.encode(v))
    }

    /// Combined kill probabilities, in input order.
    pub fn predict_all(&self, rows: &[FeatureVector]) -> Vec<f64> {
        rows.par_iter().map(|v| self.predict(v).combined).collect()
    }

    /// Both model probabilities and their mean, in input order.
    pub fn predict_parts(&self, rows: &[FeatureVector]) -> Vec<Prediction> {
        rows.par_iter().map(|v| self.predict(v)).collect()
    }

    pub fn importance(&self) -> ImportanceReport {
        ImportanceReport::new(
            self.encoder.feature_names.clone(),
            self.forest.importance(NUM_FEATURES),
            self.booster.importance(NUM_FEATURES),
        )
    }

    fn payload(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let payload = self.payload()?;
        let checksum = hex_sha256(payload.as_bytes());
        // The model is embedded as raw JSON so the checksum covers exact bytes.
        let text = format!("{{\"checksum\":\"{checksum}\",\"model\":{payload}}}\n");
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<TreeEnsemblePair> {
        let text = read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<TreeEnsemblePair> {
        #[derive(Deserialize)]
        struct Envelope<'a> {
            checksum: String,
            #[serde(borrow)]
            model: &'a serde_json::value::RawValue,
        }
        let env: Envelope =
            serde_json::from_str(text).map_err(|e| Error::Checksum(format!("unreadable model file: {e}")))?;
        let payload = env.model.get();
        let actual = hex_sha256(payload.as_bytes());
        if actual != env.checksum {
            return Err(Error::Checksum(format!("expected {}, computed {actual}", env.checksum)));
        }
        let version: serde_json::Value = serde_json::from_str(payload)?;
        let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let model: TreeEnsemblePair = serde_json::from_str(payload).map_err(|e| Error::Schema(e.to_string()))?;
        model.encoder.check_schema()?;
        Ok(model)
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Min-max scaling to [0, 1]. A constant vector maps to all ones when
/// positive and all zeros otherwise.
pub fn min_max(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        raw.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        raw.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelImportance {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<String>,
    pub forest: ModelImportance,
    pub booster: ModelImportance,
}

impl ImportanceReport {
    pub fn new(features: Vec<String>, forest_raw: Vec<f64>, booster_raw: Vec<f64>) -> ImportanceReport {
        ImportanceReport {
            features,
            forest: ModelImportance {
                normalized: min_max(&forest_raw),
                raw: forest_raw,
            },
            booster: ModelImportance {
                normalized: min_max(&booster_raw),
                raw: booster_raw,
            },
        }
    }

    /// Index of the feature with the highest normalized importance.
    pub fn top(imp: &[f64]) -> Option<usize> {
        imp.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
    }
}

/// Mean normalized importance per feature and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedImportance {
    pub features: Vec<String>,
    pub reports: usize,
    pub forest: Vec<f64>,
    pub booster: Vec<f64>,
}

pub fn aggregate_importances(reports: &[ImportanceReport]) -> Result<AggregatedImportance> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidParameter("no importance reports to aggregate".into()))?;
    let d = first.features.len();
    for r in reports {
        if r.features != first.features || r.forest.normalized.len() != d || r.booster.normalized.len() != d {
            return Err(Error::Schema("importance reports cover different features".into()));
        }
    }
    let k = reports.len() as f64;
    let mean = |pick: fn(&ImportanceReport) -> &Vec<f64>| -> Vec<f64> {
        (0..d)
            .map(|j| reports.iter().map(|r| pick(r)[j]).sum::<f64>() / k)
            .collect()
    };
    Ok(AggregatedImportance {
        features: first.features.clone(),
        reports: reports.len(),
        forest: mean(|r| &r.forest.normalized),
        booster: mean(|r| &r.booster.normalized),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_is_the_mean() {
        assert_eq!(combine(0.4, 0.6).unwrap(), 0.5);
        assert_eq!(combine(0.0, 1.0).unwrap(), 0.5);
        assert_eq!(combine(0.3, 0.3).unwrap(), 0.3);
        assert!(matches!(combine(1.2, 0.0), Err(Error::NotAProbability(_))));
    }

    #[test]
    fn min_max_examples() {
        assert_eq!(min_max(&[2.0, 4.0, 10.0]), vec![0.0, 0.25, 1.0]);
        assert_eq!(min_max(&[3.0]), vec![1.0]);
        assert_eq!(min_max(&[0.0, 0.0, 7.0]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn aggregation() {
        let f = vec!["a".to_string(), "b".to_string()];
        let a = ImportanceReport::new(f.clone(), vec![1.0, 0.0], vec![1.0, 0.0]);
        let b = ImportanceReport::new(f.clone(), vec![0.0, 1.0], vec![0.0, 1.0]);
        let agg = aggregate_importances(&[a.clone(), b]).unwrap();
        assert_eq!(agg.forest, vec![0.5, 0.5]);
        assert_eq!(
            aggregate_importances(std::slice::from_ref(&a)).unwrap().booster,
            a.booster.normalized
        );
        let c = ImportanceReport::new(vec!["a".into()], vec![1.0], vec![1.0]);
        assert!(matches!(aggregate_importances(&[a, c]), Err(Error::Schema(_))));
    }
}
