//! Leaf-wise gradient-boosted trees on the logistic loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::{Binned, Dataset};
use super::tree::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoosterConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub min_hessian: f64,
    /// Added to the hessian sum when ordering categories.
    pub cat_smooth: f64,
}

impl Default for BoosterConfig {
    fn default() -> Self {
        BoosterConfig {
            iterations: 200,
            learning_rate: 0.1,
            max_leaves: 31,
            min_leaf: 20,
            lambda: 1.0,
            min_hessian: 1e-3,
            cat_smooth: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    /// Log-odds of the training prevalence.
    pub base_score: f64,
    pub learning_rate: f64,
    /// Unscaled trees `h_m`; each contributes `learning_rate * h_m(x)`.
    pub trees: Vec<Tree>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Booster {
    /// Log-odds after the first `m` trees.
    pub fn raw_score_at(&self, x: &[f64], m: usize) -> f64 {
        let mut z = self.base_score;
        for t in self.trees.iter().take(m) {
            z += self.learning_rate * t.predict(x);
        }
        z
    }

    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.raw_score_at(x, self.trees.len())
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }

    pub fn importance(&self, n_features: usize) -> Vec<f64> {
        let mut acc = vec![0.0; n_features];
        for t in &self.trees {
            t.accumulate_gain(&mut acc);
        }
        acc
    }
}

struct Leaf {
    node: u32,
    start: usize,
    end: usize,
    hists: Vec<Histogram>,
    best: Option<Candidate>,
}

struct Builder<'a> {
    binned: &'a Binned,
    crit: Criterion,
    min_leaf: f64,
}

impl Builder<'_> {
    fn histograms(&self, rows: &[u32], g: &[f64], h: &[f64]) -> Vec<Histogram> {
        (0..self.binned.kinds.len())
            .into_par_iter()
            .map(|f| build_histogram(&self.binned.bins[f], self.binned.n_bins[f], rows, g, h))
            .collect()
    }

    fn best(&self, hists: &[Histogram]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for (f, hist) in hists.iter().enumerate() {
            if let Some(c) = best_split(f, self.binned.kinds[f], hist, &self.crit, self.min_leaf) {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Grows one tree; returns it with the leaf value of every row.
    fn tree(&self, g: &[f64], h: &[f64], max_leaves: usize, lambda: f64) -> (Tree, Vec<f64>) {
        let n = g.len();
        let mut rows: Vec<u32> = (0..n as u32).collect();
        let hists = self.histograms(&rows, g, h);
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut leaves = vec![Leaf {
            node: 0,
            start: 0,
            end: n,
            best: self.best(&hists),
            hists,
        }];
        while leaves.len() < max_leaves {
            // Highest gain; earliest leaf on ties.
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.as_ref().map(|b| (i, b.gain)))
                .fold(None, |acc: Option<(usize, f64)>, (i, gain)| match acc {
                    Some((_, g0)) if g0 >= gain => acc,
                    _ => Some((i, gain)),
                });
            let Some((i, _)) = pick else { break };
            let leaf = leaves.swap_remove(i);
            let c = leaf.best.expect("picked leaf has a split");
            let mask = c.left_mask(self.binned);
            let n_left = partition(&mut rows[leaf.start..leaf.end], &self.binned.bins[c.feature], &mask);
            let mid = leaf.start + n_left;
            // Build the smaller child directly and derive its sibling.
            let left_small = n_left <= leaf.end - mid;
            let small_rows = if left_small {
                &rows[leaf.start..mid]
            } else {
                &rows[mid..leaf.end]
            };
            let small = self.histograms(small_rows, g, h);
            let large: Vec<Histogram> = leaf
                .hists
                .iter()
                .zip(&small)
                .map(|(p, s)| subtract_histogram(p, s))
                .collect();
            let (lh, rh) = if left_small { (small, large) } else { (large, small) };
            let left_id = nodes.len() as u32;
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaf.node as usize] = Node::Split {
                feature: c.feature,
                rule: c.rule(self.binned),
                default_left: c.default_left(),
                gain: c.gain,
                left: left_id,
                right: left_id + 1,
            };
            leaves.push(Leaf {
                node: left_id,
                start: leaf.start,
                end: mid,
                best: self.best(&lh),
                hists: lh,
            });
            leaves.push(Leaf {
                node: left_id + 1,
                start: mid,
                end: leaf.end,
                best: self.best(&rh),
                hists: rh,
            });
        }
        let mut out = vec![0.0; n];
        for leaf in &leaves {
            let part = &rows[leaf.start..leaf.end];
            let (gs, hs) = part
                .iter()
                .fold((0.0, 0.0), |(a, b), &r| (a + g[r as usize], b + h[r as usize]));
            let value = -gs / (hs + lambda);
            nodes[leaf.node as usize] = Node::Leaf { value };
            for &r in part {
                out[r as usize] = value;
            }
        }
        (Tree::new(nodes), out)
    }
}

pub fn train_booster(data: &Dataset, binned: &Binned, cfg: &BoosterConfig) -> Result<Booster> {
    data.check_both_classes()?;
    let non_negative = |x: f64| x.partial_cmp(&0.0).is_some_and(|o| o.is_ge());
    if cfg.max_leaves < 1 || !non_negative(cfg.learning_rate) || !non_negative(cfg.lambda) {
        return Err(Error::InvalidParameter(
            "booster needs max_leaves >= 1, learning_rate >= 0, lambda >= 0".into(),
        ));
    }
    let n = data.n_rows();
    let y: Vec<f64> = data.labels.iter().map(|&b| f64::from(u8::from(b))).collect();
    let prevalence = y.iter().sum::<f64>() / n as f64;
    let base_score = (prevalence / (1.0 - prevalence)).ln();
    let builder = Builder {
        binned,
        crit: Criterion::Newton {
            lambda: cfg.lambda,
            min_hessian: cfg.min_hessian,
            cat_smooth: cfg.cat_smooth,
        },
        min_leaf: cfg.min_leaf.max(1) as f64,
    };
    let mut raw = vec![base_score; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            g[i] = p - y[i];
            h[i] = p * (1.0 - p);
        }
        let (tree, values) = builder.tree(&g, &h, cfg.max_leaves, cfg.lambda);
        for (z, v) in raw.iter_mut().zip(&values) {
            *z += cfg.learning_rate * v;
        }
        trees.push(tree);
    }
    Ok(Booster {
        base_score,
        learning_rate: cfg.learning_rate,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        // Twenty rows, label = x0 > 9.
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i), f64::from(i % 3)]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i > 9).collect();
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn zero_iterations_is_base_rate() {
        let data = toy();
        let b = train_booster(
            &data,
            &Binned::new(&data, 255),
            &BoosterConfig {
                iterations: 0,
                ..BoosterConfig::default()
            },
        )
        .unwrap();
        assert_eq!(b.base_score, 0.0);
        assert_eq!(b.predict(&[3.0, 1.0]), 0.5);
    }

    #[test]
    fn zero_rate_matches_empty_ensemble() {
        let data = toy();
        let b = train_booster(
            &data,
            &Binned::new(&data, 255),
            &BoosterConfig {
                iterations: 5,
                learning_rate: 0.0,
                min_leaf: 1,
                ..BoosterConfig::default()
            },
        )
        .unwrap();
        for i in 0..20 {
            assert_eq!(b.predict(&data.row(i)), sigmoid(b.base_score));
        }
    }

    #[test]
    fn separable_toy_is_fit() {
        let data = toy();
        let b = train_booster(
            &data,
            &Binned::new(&data, 255),
            &BoosterConfig {
                iterations: 50,
                learning_rate: 0.1,
                min_leaf: 1,
                ..BoosterConfig::default()
            },
        )
        .unwrap();
        for i in 0..20 {
            assert_eq!(b.predict(&data.row(i)) >= 0.5, data.labels[i], "row {i}");
        }
    }
}
