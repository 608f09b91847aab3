use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A mutant id qualified by the corpus it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MutantKey {
    pub corpus: String,
    pub id: u64,
}

impl MutantKey {
    pub fn new(corpus: impl Into<String>, id: u64) -> Self {
        MutantKey {
            corpus: corpus.into(),
            id,
        }
    }
}

impl fmt::Display for MutantKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.corpus, self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    SameVersion,
    CrossVersion,
    CrossProjectOneToOne,
    CrossProjectManyToOne,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub scenario: Scenario,
    pub seed: u64,
    pub train: Vec<MutantKey>,
    pub val: Vec<MutantKey>,
    pub test: Vec<MutantKey>,
}

/// Mutant ids of one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIds {
    pub tag: String,
    pub ids: Vec<u64>,
}

fn keys(tag: &str, ids: &[u64]) -> Vec<MutantKey> {
    let set: BTreeSet<u64> = ids.iter().copied().collect();
    set.into_iter().map(|id| MutantKey::new(tag, id)).collect()
}

fn shuffled(mut keys: Vec<MutantKey>, seed: u64) -> Vec<MutantKey> {
    keys.sort();
    keys.dedup();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    keys
}

/// 80/10/10 split of one corpus: floor for train and val, remainder to test.
pub fn split_same_version(corpus: &str, ids: &[u64], seed: u64) -> Result<DatasetSplit> {
    let all = shuffled(keys(corpus, ids), seed);
    let n = all.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!(
            "same-version split needs at least 10 mutants, got {n}"
        )));
    }
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let mut it = all.into_iter();
    let train = it.by_ref().take(n_train).collect();
    let val = it.by_ref().take(n_val).collect();
    Ok(DatasetSplit {
        scenario: Scenario::SameVersion,
        seed,
        train,
        val,
        test: it.collect(),
    })
}

fn split_90_10(all: Vec<MutantKey>) -> (Vec<MutantKey>, Vec<MutantKey>) {
    let n_train = all.len() * 9 / 10;
    let mut train = all;
    let val = train.split_off(n_train);
    (train, val)
}

/// Old version split 90/10 into train/val; every new-version mutant is test.
pub fn split_cross_version(old: &CorpusIds, new: &CorpusIds, seed: u64) -> Result<DatasetSplit> {
    if old.ids.is_empty() {
        return Err(Error::InvalidParameter(
            "cross-version split needs a non-empty old version".into(),
        ));
    }
    if new.ids.is_empty() {
        return Err(Error::InvalidParameter(
            "cross-version split needs a non-empty new version".into(),
        ));
    }
    if old.tag == new.tag {
        return Err(Error::InvalidParameter(
            "old and new versions must be distinct corpora".into(),
        ));
    }
    let (train, val) = split_90_10(shuffled(keys(&old.tag, &old.ids), seed));
    Ok(DatasetSplit {
        scenario: Scenario::CrossVersion,
        seed,
        train,
        val,
        test: keys(&new.tag, &new.ids),
    })
}

/// Union of the sources split 90/10; every target mutant is test.
pub fn split_cross_project(sources: &[CorpusIds], target: &CorpusIds, seed: u64) -> Result<DatasetSplit> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter(
            "cross-project split needs at least one source corpus".into(),
        ));
    }
    if sources.iter().any(|s| s.tag == target.tag) {
        return Err(Error::InvalidParameter(format!(
            "target corpus `{}` is also a source",
            target.tag
        )));
    }
    let mut tags = BTreeSet::new();
    if !sources.iter().all(|s| tags.insert(s.tag.as_str())) {
        return Err(Error::InvalidParameter("duplicate source corpus".into()));
    }
    let union: Vec<MutantKey> = sources.iter().flat_map(|s| keys(&s.tag, &s.ids)).collect();
    if union.is_empty() {
        return Err(Error::InvalidParameter("source corpora contain no mutants".into()));
    }
    let (train, val) = split_90_10(shuffled(union, seed));
    Ok(DatasetSplit {
        scenario: if sources.len() == 1 {
            Scenario::CrossProjectOneToOne
        } else {
            Scenario::CrossProjectManyToOne
        },
        seed,
        train,
        val,
        test: keys(&target.tag, &target.ids),
    })
}
