//! Binary decision trees and the histogram split search shared by the
//! forest and the booster.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::encode::Binned;
use crate::extractor::vector::FeatureKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Left iff `x <= threshold`.
    Numeric { threshold: f64 },
    /// Left iff the code is in `left`, right iff in `right`; codes seen in
    /// neither (including UNSEEN) follow `default_left`.
    Categorical { left: Vec<u32>, right: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        /// Direction for values the rule does not cover: the child that
        /// received more training rows.
        default_left: bool,
        gain: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "TreeRepr", into = "TreeRepr")]
pub struct Tree {
    nodes: Vec<Node>,
    /// Inference layout, built on first use.
    compiled: OnceLock<Compiled>,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    nodes: Vec<Node>,
}

impl From<TreeRepr> for Tree {
    fn from(r: TreeRepr) -> Tree {
        Tree::new(r.nodes)
    }
}

impl From<Tree> for TreeRepr {
    fn from(t: Tree) -> TreeRepr {
        TreeRepr { nodes: t.nodes }
    }
}

impl PartialEq for Tree {
    fn eq(&self, other: &Tree) -> bool {
        self.nodes == other.nodes
    }
}

impl SplitRule {
    pub fn goes_left(&self, x: f64, default_left: bool) -> bool {
        match self {
            SplitRule::Numeric { threshold } => {
                if x.is_nan() {
                    default_left
                } else {
                    x <= *threshold
                }
            }
            SplitRule::Categorical { left, right } => {
                let code = x as u32;
                if left.binary_search(&code).is_ok() {
                    true
                } else if right.binary_search(&code).is_ok() {
                    false
                } else {
                    default_left
                }
            }
        }
    }
}

const LEAF: u32 = u32::MAX;
const DEFAULT_LEFT: u32 = 1 << 31;
const CATEGORICAL: u32 = 1 << 30;
const INDEX: u32 = CATEGORICAL - 1;
/// Categorical rules over codes below this use a two-bit-per-code table.
const TABLE_CODES: u32 = 256;

/// 24-byte node: `value` is the leaf value or numeric threshold.
#[derive(Debug, Clone, Copy)]
struct Flat {
    value: f64,
    feature: u32,
    left: u32,
    right: u32,
    meta: u32,
}

#[derive(Debug, Clone, Copy)]
enum CatRule {
    /// Codes below `codes` are looked up in `table[start..]`, two bits each.
    Table { start: u32, codes: u32 },
    /// Sorted code lists in `sorted`.
    Lists { left: (u32, u32), right: (u32, u32) },
}

#[derive(Debug, Clone, Default)]
struct Compiled {
    flat: Vec<Flat>,
    cats: Vec<CatRule>,
    table: Vec<u64>,
    sorted: Vec<u32>,
}

impl Compiled {
    fn build(nodes: &[Node]) -> Compiled {
        let mut c = Compiled::default();
        for n in nodes {
            let flat = match n {
                Node::Leaf { value } => Flat {
                    value: *value,
                    feature: LEAF,
                    left: 0,
                    right: 0,
                    meta: 0,
                },
                Node::Split {
                    feature,
                    rule,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let mut meta = if *default_left { DEFAULT_LEFT } else { 0 };
                    let value = match rule {
                        SplitRule::Numeric { threshold } => *threshold,
                        SplitRule::Categorical { left, right } => {
                            meta |= CATEGORICAL | c.cats.len() as u32;
                            let rule = c.categorical(left, right);
                            c.cats.push(rule);
                            0.0
                        }
                    };
                    Flat {
                        value,
                        feature: *feature as u32,
                        left: *left,
                        right: *right,
                        meta,
                    }
                }
            };
            c.flat.push(flat);
        }
        c
    }

    fn categorical(&mut self, left: &[u32], right: &[u32]) -> CatRule {
        let codes = left.iter().chain(right).max().map_or(0, |&m| m + 1);
        if codes <= TABLE_CODES {
            let start = self.table.len() as u32;
            self.table
                .resize(self.table.len() + (2 * codes as usize).div_ceil(64), 0);
            for (set, bit) in [(left, 1u64), (right, 2u64)] {
                for &code in set {
                    let pos = 2 * code as usize;
                    self.table[start as usize + pos / 64] |= bit << (pos % 64);
                }
            }
            CatRule::Table { start, codes }
        } else {
            let mut push = |set: &[u32]| {
                let s = self.sorted.len() as u32;
                self.sorted.extend_from_slice(set);
                (s, s + set.len() as u32)
            };
            CatRule::Lists {
                left: push(left),
                right: push(right),
            }
        }
    }

    fn goes_left(&self, n: &Flat, x: f64) -> bool {
        let default_left = n.meta & DEFAULT_LEFT != 0;
        if n.meta & CATEGORICAL == 0 {
            return if x.is_nan() { default_left } else { x <= n.value };
        }
        let code = x as u32;
        match self.cats[(n.meta & INDEX) as usize] {
            CatRule::Table { start, codes } => {
                if code >= codes {
                    return default_left;
                }
                let pos = 2 * code as usize;
                match (self.table[start as usize + pos / 64] >> (pos % 64)) & 3 {
                    1 => true,
                    2 => false,
                    _ => default_left,
                }
            }
            CatRule::Lists { left, right } => {
                let slice = |(a, b): (u32, u32)| &self.sorted[a as usize..b as usize];
                if slice(left).binary_search(&code).is_ok() {
                    true
                } else if slice(right).binary_search(&code).is_ok() {
                    false
                } else {
                    default_left
                }
            }
        }
    }
}

impl Tree {
    pub fn new(nodes: Vec<Node>) -> Tree {
        Tree {
            nodes,
            compiled: OnceLock::new(),
        }
    }

    pub fn leaf(value: f64) -> Tree {
        Tree::new(vec![Node::Leaf { value }])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Leaf value reached by row `x` (schema-ordered encoded features).
    pub fn predict(&self, x: &[f64]) -> f64 {
        let c = self.compiled.get_or_init(|| Compiled::build(&self.nodes));
        let mut i = 0usize;
        loop {
            let n = &c.flat[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if c.goes_left(n, x[n.feature as usize]) {
                n.left
            } else {
                n.right
            } as usize;
        }
    }

    /// Reference traversal over the serialized nodes.
    pub fn predict_nodes(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    rule,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    i = if rule.goes_left(x[*feature], *default_left) {
                        *left
                    } else {
                        *right
                    } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Adds each split's gain to `acc[feature]`.
    pub fn accumulate_gain(&self, acc: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                acc[*feature] += gain;
            }
        }
    }
}

/// How a candidate partition is scored.
#[derive(Debug, Clone, Copy)]
pub enum Criterion {
    /// Weighted Gini decrease; `g` = positives, `h` = rows.
    Gini,
    /// Second-order gain `G²/(H+λ)`; categories ordered by `G/(H+smooth)`.
    Newton {
        lambda: f64,
        min_hessian: f64,
        cat_smooth: f64,
    },
}

impl Criterion {
    fn score(&self, g: f64, h: f64) -> f64 {
        match *self {
            Criterion::Gini => {
                if h <= 0.0 {
                    0.0
                } else {
                    (g * g + (h - g) * (h - g)) / h
                }
            }
            Criterion::Newton { lambda, .. } => g * g / (h + lambda),
        }
    }

    fn order_key(&self, g: f64, h: f64) -> f64 {
        match *self {
            Criterion::Gini => g / h,
            Criterion::Newton { cat_smooth, .. } => g / (h + cat_smooth),
        }
    }

    fn admissible(&self, left: &Stat, right: &Stat, min_leaf: f64) -> bool {
        let base = left.n >= min_leaf && right.n >= min_leaf;
        match *self {
            Criterion::Gini => base,
            Criterion::Newton { min_hessian, .. } => base && left.h >= min_hessian && right.h >= min_hessian,
        }
    }

    pub fn gain(&self, left: &Stat, right: &Stat) -> f64 {
        self.score(left.g, left.h) + self.score(right.g, right.h) - self.score(left.g + right.g, left.h + right.h)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stat {
    pub g: f64,
    pub h: f64,
    pub n: f64,
}

impl Stat {
    fn add(&mut self, o: &Stat) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    fn sub(&self, o: &Stat) -> Stat {
        Stat {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

/// Per-bin gradient statistics of one feature over one node.
pub type Histogram = Vec<Stat>;

pub fn build_histogram(bins: &[u32], n_bins: usize, rows: &[u32], g: &[f64], h: &[f64]) -> Histogram {
    let mut hist = vec![Stat::default(); n_bins];
    for &r in rows {
        let s = &mut hist[bins[r as usize] as usize];
        s.g += g[r as usize];
        s.h += h[r as usize];
        s.n += 1.0;
    }
    hist
}

pub fn subtract_histogram(parent: &Histogram, child: &Histogram) -> Histogram {
    parent.iter().zip(child).map(|(p, c)| p.sub(c)).collect()
}

/// Best split of one feature at one node.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub feature: usize,
    pub gain: f64,
    /// Numeric: split after this bin. Categorical: unused.
    pub bin: usize,
    pub left_bins: Vec<u32>,
    pub right_bins: Vec<u32>,
    pub left: Stat,
    pub right: Stat,
}

impl Candidate {
    pub fn rule(&self, binned: &Binned) -> SplitRule {
        match binned.kinds[self.feature] {
            FeatureKind::Numeric => SplitRule::Numeric {
                threshold: binned.cuts[self.feature][self.bin],
            },
            FeatureKind::Categorical => SplitRule::Categorical {
                left: self.left_bins.clone(),
                right: self.right_bins.clone(),
            },
        }
    }

    /// Membership table over bins for partitioning training rows.
    pub fn left_mask(&self, binned: &Binned) -> Vec<bool> {
        let nb = binned.n_bins[self.feature];
        match binned.kinds[self.feature] {
            FeatureKind::Numeric => (0..nb).map(|b| b <= self.bin).collect(),
            FeatureKind::Categorical => {
                let mut m = vec![false; nb];
                for &b in &self.left_bins {
                    m[b as usize] = true;
                }
                m
            }
        }
    }

    pub fn default_left(&self) -> bool {
        self.left.n >= self.right.n
    }
}

const MIN_GAIN: f64 = 1e-12;

/// Best admissible split of `feature` given its node histogram.
pub fn best_split(
    feature: usize,
    kind: FeatureKind,
    hist: &Histogram,
    crit: &Criterion,
    min_leaf: f64,
) -> Option<Candidate> {
    let mut total = Stat::default();
    for s in hist {
        total.add(s);
    }
    let mut best: Option<Candidate> = None;
    match kind {
        FeatureKind::Numeric => {
            let mut left = Stat::default();
            for (b, s) in hist.iter().enumerate().take(hist.len().saturating_sub(1)) {
                left.add(s);
                if s.n == 0.0 {
                    continue;
                }
                let right = total.sub(&left);
                if right.n <= 0.0 || !crit.admissible(&left, &right, min_leaf) {
                    continue;
                }
                let gain = crit.gain(&left, &right);
                if gain > MIN_GAIN && best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate {
                        feature,
                        gain,
                        bin: b,
                        left_bins: Vec::new(),
                        right_bins: Vec::new(),
                        left,
                        right,
                    });
                }
            }
        }
        FeatureKind::Categorical => {
            let mut present: Vec<u32> = (0..hist.len() as u32).filter(|&b| hist[b as usize].n > 0.0).collect();
            if present.len() < 2 {
                return None;
            }
            present.sort_by(|&a, &b| {
                let (sa, sb) = (&hist[a as usize], &hist[b as usize]);
                crit.order_key(sa.g, sa.h)
                    .total_cmp(&crit.order_key(sb.g, sb.h))
                    .then(a.cmp(&b))
            });
            let mut left = Stat::default();
            let mut best_k = 0;
            for k in 1..present.len() {
                left.add(&hist[present[k - 1] as usize]);
                let right = total.sub(&left);
                if !crit.admissible(&left, &right, min_leaf) {
                    continue;
                }
                let gain = crit.gain(&left, &right);
                if gain > MIN_GAIN && best.as_ref().is_none_or(|c| gain > c.gain) {
                    best_k = k;
                    best = Some(Candidate {
                        feature,
                        gain,
                        bin: 0,
                        left_bins: Vec::new(),
                        right_bins: Vec::new(),
                        left,
                        right,
                    });
                }
            }
            if let Some(c) = best.as_mut() {
                c.left_bins = present[..best_k].to_vec();
                c.right_bins = present[best_k..].to_vec();
                c.left_bins.sort_unstable();
                c.right_bins.sort_unstable();
            }
        }
    }
    best
}

/// Stable in-place partition of `rows` by `left_mask[bins[row]]`; returns
/// the number of rows sent left.
pub fn partition(rows: &mut [u32], bins: &[u32], left_mask: &[bool]) -> usize {
    let (l, r): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&i| left_mask[bins[i as usize] as usize]);
    let n = l.len();
    rows[..n].copy_from_slice(&l);
    rows[n..].copy_from_slice(&r);
    n
}
