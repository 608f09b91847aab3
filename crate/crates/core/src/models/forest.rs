//! Bagged Gini trees whose leaves hold class-1 frequencies.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::{Binned, Dataset};
use super::tree::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means ⌈√d⌉.
    pub features_per_split: Option<usize>,
    /// Draw a bootstrap sample per tree; off uses every row once.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 300,
            max_depth: 16,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Mean over trees of the leaf class-1 frequency.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Per-tree leaf values for `x`, in tree order.
    pub fn trace(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn importance(&self, n_features: usize) -> Vec<f64> {
        let mut acc = vec![0.0; n_features];
        for t in &self.trees {
            t.accumulate_gain(&mut acc);
        }
        acc
    }
}

struct Grower<'a> {
    binned: &'a Binned,
    y: &'a [f64],
    ones: &'a [f64],
    cfg: &'a ForestConfig,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf_value(&self, rows: &[u32]) -> f64 {
        rows.iter().map(|&r| self.y[r as usize]).sum::<f64>() / rows.len() as f64
    }

    fn find_split(&mut self, rows: &[u32]) -> Option<Candidate> {
        let d = self.binned.kinds.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<Candidate> = None;
        // Keep looking past the first `mtry` features until some split is valid.
        for (k, &f) in order.iter().enumerate() {
            if k >= self.mtry && best.is_some() {
                break;
            }
            let hist = build_histogram(&self.binned.bins[f], self.binned.n_bins[f], rows, self.y, self.ones);
            if let Some(c) = best_split(
                f,
                self.binned.kinds[f],
                &hist,
                &Criterion::Gini,
                self.cfg.min_leaf as f64,
            ) {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [u32], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let value = self.leaf_value(rows);
        self.nodes.push(Node::Leaf { value });
        let pure = value == 0.0 || value == 1.0;
        if pure || depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf.max(1) {
            return id;
        }
        let Some(c) = self.find_split(rows) else { return id };
        let mask = c.left_mask(self.binned);
        let n_left = partition(rows, &self.binned.bins[c.feature], &mask);
        let (l_rows, r_rows) = rows.split_at_mut(n_left);
        let left = self.grow(l_rows, depth + 1);
        let right = self.grow(r_rows, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: c.feature,
            rule: c.rule(self.binned),
            default_left: c.default_left(),
            gain: c.gain,
            left,
            right,
        };
        id
    }
}

pub fn train_forest(data: &Dataset, binned: &Binned, cfg: &ForestConfig, seed: u64) -> Result<Forest> {
    data.check_both_classes()?;
    if cfg.trees == 0 {
        return Err(Error::InvalidParameter("forest needs at least one tree".into()));
    }
    let n = data.n_rows();
    let d = data.n_features();
    let mtry = cfg
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let y: Vec<f64> = data.labels.iter().map(|&b| f64::from(u8::from(b))).collect();
    let ones = vec![1.0; n];
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..cfg.trees).map(|_| master.gen()).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut rows: Vec<u32> = if cfg.bootstrap {
                let mut r: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n as u32)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n as u32).collect()
            };
            let mut g = Grower {
                binned,
                y: &y,
                ones: &ones,
                cfg,
                mtry,
                rng,
                nodes: Vec::new(),
            };
            g.grow(&mut rows, 0);
            Tree::new(g.nodes)
        })
        .collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Dataset {
        Dataset::from_rows(
            &[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]],
            &[false, false, true, true],
        )
        .unwrap()
    }

    #[test]
    fn single_stump_splits_discriminating_feature() {
        let data = separable();
        let binned = Binned::new(&data, 255);
        let cfg = ForestConfig {
            trees: 1,
            max_depth: 1,
            bootstrap: false,
            features_per_split: Some(2),
            ..ForestConfig::default()
        };
        let f = train_forest(&data, &binned, &cfg, 1).unwrap();
        let t = &f.trees[0];
        assert_eq!(t.nodes().len(), 3);
        match &t.nodes()[0] {
            Node::Split { feature, rule, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*rule, SplitRule::Numeric { threshold: 1.5 });
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(f.predict(&[0.0, 5.0]), 0.0);
        assert_eq!(f.predict(&[3.0, 5.0]), 1.0);
    }

    #[test]
    fn same_seed_same_forest() {
        let data = separable();
        let binned = Binned::new(&data, 255);
        let cfg = ForestConfig {
            trees: 10,
            ..ForestConfig::default()
        };
        assert_eq!(
            train_forest(&data, &binned, &cfg, 9).unwrap(),
            train_forest(&data, &binned, &cfg, 9).unwrap()
        );
    }

    #[test]
    fn single_class_is_rejected() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0]], &[true, true]).unwrap();
        let binned = Binned::new(&data, 255);
        assert!(matches!(
            train_forest(&data, &binned, &ForestConfig::default(), 0),
            Err(Error::SingleClass)
        ));
    }
}
