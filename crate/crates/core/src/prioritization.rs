//! Mutation-based test prioritization and APFD scoring.
//!
//! Additional greedy runs in O(T²M): each of the T selections rescans the
//! remaining tests' kill sets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::KillMatrix;
use crate::io::write_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Total,
    Additional,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Total => "total",
            Strategy::Additional => "additional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrioritizedSuite {
    pub strategy: Strategy,
    pub seed: u64,
    pub order: Vec<u64>,
}

/// Test id → mutants it kills. Tests killing nothing have empty sets.
pub type KillSets = BTreeMap<u64, BTreeSet<u64>>;

fn nonempty(kills: &KillSets) -> Result<()> {
    if kills.is_empty() {
        Err(Error::InvalidParameter("prioritization needs at least one test".into()))
    } else {
        Ok(())
    }
}

/// Descending kill count; ties follow a seeded shuffle.
pub fn prioritize_total_sets(kills: &KillSets, seed: u64) -> Result<PrioritizedSuite> {
    nonempty(kills)?;
    let mut order: Vec<u64> = kills.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|t| std::cmp::Reverse(kills[t].len()));
    Ok(PrioritizedSuite {
        strategy: Strategy::Total,
        seed,
        order,
    })
}

/// Greedy on not-yet-killed mutants. When every remaining test adds
/// nothing, the killed set is cleared and greedy continues over the
/// remaining tests with their original kill sets.
pub fn prioritize_additional_sets(kills: &KillSets, seed: u64) -> Result<PrioritizedSuite> {
    nonempty(kills)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<(u64, &BTreeSet<u64>)> = kills.iter().map(|(&t, s)| (t, s)).collect();
    let mut killed: BTreeSet<u64> = BTreeSet::new();
    let mut order = Vec::with_capacity(remaining.len());
    let mut tied: Vec<usize> = Vec::new();
    while !remaining.is_empty() {
        if gains(&remaining, &killed, &mut tied) == 0 && !killed.is_empty() {
            killed.clear();
            gains(&remaining, &killed, &mut tied);
        }
        let pick = tied[rng.gen_range(0..tied.len())];
        let (t, set) = remaining.remove(pick);
        killed.extend(set.iter().copied());
        order.push(t);
    }
    Ok(PrioritizedSuite {
        strategy: Strategy::Additional,
        seed,
        order,
    })
}

/// Fills `tied` with the indices of maximal marginal gain and returns it.
fn gains(remaining: &[(u64, &BTreeSet<u64>)], killed: &BTreeSet<u64>, tied: &mut Vec<usize>) -> usize {
    tied.clear();
    let mut best = 0;
    for (i, (_, set)) in remaining.iter().enumerate() {
        let g = set.iter().filter(|m| !killed.contains(m)).count();
        if g > best || tied.is_empty() {
            best = g;
            tied.clear();
        }
        if g == best {
            tied.push(i);
        }
    }
    best
}

pub fn prioritize_total(matrix: &KillMatrix, seed: u64) -> Result<PrioritizedSuite> {
    prioritize_total_sets(&matrix.kills_by_test(), seed)
}

pub fn prioritize_additional(matrix: &KillMatrix, seed: u64) -> Result<PrioritizedSuite> {
    prioritize_additional_sets(&matrix.kills_by_test(), seed)
}

pub fn prioritize(matrix: &KillMatrix, strategy: Strategy, seed: u64) -> Result<PrioritizedSuite> {
    match strategy {
        Strategy::Total => prioritize_total(matrix, seed),
        Strategy::Additional => prioritize_additional(matrix, seed),
    }
}

/// Fault name → tests that detect it.
pub type FaultMap = BTreeMap<String, BTreeSet<u64>>;

/// Treats every actually killed mutant as a fault detected by its killers.
pub fn faults_from_kills(actual: &KillMatrix) -> FaultMap {
    let mut out = FaultMap::new();
    for (&(m, t), &k) in &actual.entries {
        if k {
            out.entry(format!("mutant-{m}")).or_default().insert(t);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfdResult {
    pub apfd: f64,
    /// 1-based rank of the first detecting test, per fault.
    pub fault_positions: Vec<usize>,
}

/// `1 − ΣTF/(n·r) + 1/(2n)`, evaluated as `(2nr − 2ΣTF + r) / 2nr` in
/// integers so the only rounding is the final division.
pub fn apfd_closed_form(positions: &[usize], n: usize) -> f64 {
    let (n, r) = (n as u128, positions.len() as u128);
    let sum: u128 = positions.iter().map(|&p| p as u128).sum();
    let den = 2 * n * r;
    (den + r - 2 * sum) as f64 / den as f64
}

pub fn apfd(order: &[u64], faults: &FaultMap) -> Result<ApfdResult> {
    if order.is_empty() || faults.is_empty() {
        return Err(Error::InvalidParameter(
            "APFD needs at least one test and one fault".into(),
        ));
    }
    let mut rank: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, &t) in order.iter().enumerate() {
        if rank.insert(t, i + 1).is_some() {
            return Err(Error::InvalidParameter(format!("test {t} appears twice in the order")));
        }
    }
    let fault_positions = faults
        .iter()
        .map(|(name, detecting)| {
            detecting
                .iter()
                .filter_map(|t| rank.get(t).copied())
                .min()
                .ok_or_else(|| Error::UndetectableFault(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ApfdResult {
        apfd: apfd_closed_form(&fault_positions, order.len()),
        fault_positions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub apfd_predicted: f64,
    pub apfd_actual: f64,
    pub abs_diff: f64,
    pub predicted_order: Vec<u64>,
    pub actual_order: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfdDifference {
    pub strategy: Strategy,
    pub repeats: Vec<RepeatResult>,
    pub mean_abs_diff: f64,
}

/// Repeat `r` prioritizes both matrices with seed `seed + r`.
pub fn apfd_difference(
    predicted: &KillMatrix,
    actual: &KillMatrix,
    faults: &FaultMap,
    strategy: Strategy,
    repeats: usize,
    seed: u64,
) -> Result<ApfdDifference> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("at least one repeat is required".into()));
    }
    if predicted.tests() != actual.tests() {
        return Err(Error::UniverseMismatch);
    }
    let (pk, ak) = (predicted.kills_by_test(), actual.kills_by_test());
    let run = |kills: &KillSets, s: u64| match strategy {
        Strategy::Total => prioritize_total_sets(kills, s),
        Strategy::Additional => prioritize_additional_sets(kills, s),
    };
    let rows = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let s = seed.wrapping_add(r as u64);
            let p = run(&pk, s)?;
            let a = run(&ak, s)?;
            let apfd_predicted = apfd(&p.order, faults)?.apfd;
            let apfd_actual = apfd(&a.order, faults)?.apfd;
            Ok(RepeatResult {
                repeat: r,
                strategy,
                seed: s,
                apfd_predicted,
                apfd_actual,
                abs_diff: (apfd_predicted - apfd_actual).abs(),
                predicted_order: p.order,
                actual_order: a.order,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_abs_diff = rows.iter().map(|r| r.abs_diff).sum::<f64>() / rows.len() as f64;
    Ok(ApfdDifference {
        strategy,
        repeats: rows,
        mean_abs_diff,
    })
}

pub const PRIORITIZATION_HEADER: [&str; 5] = ["repeat", "strategy", "apfd_predicted", "apfd_actual", "abs_diff"];

pub fn write_prioritization_csv(path: &Path, results: &[ApfdDifference]) -> Result<()> {
    write_csv(path, &PRIORITIZATION_HEADER, |w| {
        for d in results {
            for r in &d.repeats {
                w.write_record([
                    r.repeat.to_string(),
                    r.strategy.as_str().to_string(),
                    r.apfd_predicted.to_string(),
                    r.apfd_actual.to_string(),
                    r.abs_diff.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(rows: &[(u64, &[u64])]) -> KillSets {
        rows.iter().map(|(t, ms)| (*t, ms.iter().copied().collect())).collect()
    }

    #[test]
    fn total_sorts_by_kills() {
        let k = sets(&[(1, &[1, 2, 3]), (2, &[1]), (3, &[1, 2])]);
        for seed in 0..5 {
            assert_eq!(prioritize_total_sets(&k, seed).unwrap().order, vec![1, 3, 2]);
        }
        assert_eq!(prioritize_total_sets(&sets(&[(7, &[])]), 0).unwrap().order, vec![7]);
    }

    #[test]
    fn total_ties_are_seeded() {
        let k = sets(&[(1, &[]), (2, &[]), (3, &[]), (4, &[]), (5, &[])]);
        let a = prioritize_total_sets(&k, 11).unwrap();
        assert_eq!(a, prioritize_total_sets(&k, 11).unwrap());
        let mut sorted = a.order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn additional_hand_trace() {
        let k = sets(&[(1, &[1, 2, 3, 4]), (2, &[4, 5]), (3, &[1, 2])]);
        for seed in 0..5 {
            assert_eq!(prioritize_additional_sets(&k, seed).unwrap().order, vec![1, 2, 3]);
        }
    }

    #[test]
    fn additional_resets_over_remaining() {
        // After t1 everything is killed; the reset ranks t3 (2 kills) above t2 (1).
        let k = sets(&[(1, &[1, 2]), (2, &[1]), (3, &[1, 2])]);
        let order = prioritize_additional_sets(&k, 3).unwrap().order;
        assert_eq!(order.len(), 3);
        assert_eq!(order[2], 2);
    }

    #[test]
    fn empty_suite_is_rejected() {
        assert!(prioritize_additional_sets(&KillSets::new(), 0).is_err());
    }

    #[test]
    fn apfd_examples() {
        let faults: FaultMap = [("f".to_string(), BTreeSet::from([1]))].into_iter().collect();
        assert_eq!(apfd(&[1, 2, 3, 4], &faults).unwrap().apfd, 0.875);
        assert_eq!(apfd_closed_form(&[1, 3], 10), 0.85);
        let missing: FaultMap = [("g".to_string(), BTreeSet::from([99]))].into_iter().collect();
        assert!(matches!(apfd(&[1, 2], &missing), Err(Error::UndetectableFault(_))));
    }

    #[test]
    fn identical_matrices_have_zero_difference() {
        let m = KillMatrix::new(
            [
                ((1, 1), true),
                ((1, 2), false),
                ((2, 2), true),
                ((3, 3), true),
                ((3, 1), true),
            ]
            .into_iter()
            .collect(),
        );
        let faults = faults_from_kills(&m);
        for strategy in [Strategy::Total, Strategy::Additional] {
            let d = apfd_difference(&m, &m, &faults, strategy, 10, 42).unwrap();
            assert_eq!(d.mean_abs_diff, 0.0);
            assert_eq!(d.repeats.len(), 10);
        }
    }
}
