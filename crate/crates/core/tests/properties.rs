use std::collections::{BTreeMap, BTreeSet};

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

use killmatrix_core::corpus::split_same_version;
use killmatrix_core::corpus::{KillMap, Outcome};
use killmatrix_core::evaluation::{aggregate_mutants, ape, eval_by_reason, eval_pairs, mutation_score, KillMatrix};
use killmatrix_core::extractor::diff::diff_tokens;
use killmatrix_core::models::min_max;
use killmatrix_core::prioritization::{apfd, prioritize_additional_sets, prioritize_total_sets, FaultMap, KillSets};
use killmatrix_core::thresholds::{candidates, confusion, first_argmax, optimize_threshold};

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..120).prop_flat_map(|n| (vec(0.0f64..=1.0, n), vec(any::<bool>(), n)))
}

fn two_class() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    scored().prop_filter("both classes", |(_, y)| y.iter().any(|&b| b) && y.iter().any(|&b| !b))
}

fn kill_matrix(max: u64) -> impl Strategy<Value = KillMatrix> {
    (1..=max, 1..=max)
        .prop_flat_map(|(m, t)| {
            vec(
                prop_oneof![Just(None), Just(Some(false)), Just(Some(true))],
                (m * t) as usize,
            )
            .prop_map(move |cells| (t, cells))
        })
        .prop_map(|(t, cells)| {
            let entries = cells
                .into_iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|k| ((i as u64 / t, i as u64 % t), k)))
                .collect();
            KillMatrix::new(entries)
        })
        .prop_filter("non-empty", |m| !m.is_empty())
}

fn kill_sets(max_tests: u64, max_mutants: u64) -> impl Strategy<Value = KillSets> {
    vec(
        btree_set(0..max_mutants, 0..=max_mutants as usize),
        1..=max_tests as usize,
    )
    .prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(t, s)| (t as u64 * 3 + 1, s))
            .collect()
    })
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

fn is_subsequence(sub: &[String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|x| x == s))
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    vec(
        prop::sample::select(vec!["a", "b", "<", "<=", "+", "(", ")", ";"]),
        0..10,
    )
    .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #[test]
    fn confusion_is_monotone_in_theta((scores, labels) in scored()) {
        let grid = candidates();
        for w in grid.windows(2) {
            let lo = confusion(&scores, &labels, w[0]).unwrap();
            let hi = confusion(&scores, &labels, w[1]).unwrap();
            prop_assert!(hi.tp <= lo.tp && hi.fp <= lo.fp);
            prop_assert!(hi.fn_ >= lo.fn_ && hi.tn >= lo.tn);
        }
    }

    #[test]
    fn selection_ignores_row_order((scores, labels) in two_class(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let s2: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l2: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(optimize_threshold(&scores, &labels).unwrap(), optimize_threshold(&s2, &l2).unwrap());
    }

    #[test]
    fn selection_survives_common_positive_scaling((scores, labels) in two_class(), k in 0i32..4, b in -8i32..8) {
        let r = optimize_threshold(&scores, &labels).unwrap();
        let a = 2f64.powi(k - 1);
        let s: Vec<f64> = r
            .f1_standardized
            .iter()
            .zip(&r.j_standardized)
            .map(|(f, j)| (a * f + b as f64) + (a * j + b as f64))
            .collect();
        prop_assert_eq!(candidates()[first_argmax(&s)], r.selected);
    }

    #[test]
    fn aggregation_is_exhaustive_or(m in kill_matrix(50)) {
        let agg = aggregate_mutants(&m);
        let mutants: BTreeSet<u64> = m.entries.keys().map(|&(x, _)| x).collect();
        prop_assert_eq!(agg.keys().copied().collect::<BTreeSet<_>>(), mutants.clone());
        for x in mutants {
            let any = m.entries.iter().any(|(&(y, _), &k)| y == x && k);
            prop_assert_eq!(agg[&x], any);
        }
        let ms = mutation_score(&m).unwrap();
        prop_assert!((0.0..=100.0).contains(&ms));
        let perfect = eval_pairs(&m, &m).unwrap();
        let expect = if m.entries.values().any(|&k| k) { 1.0 } else { 0.0 };
        prop_assert_eq!((perfect.precision, perfect.recall, perfect.f1), (expect, expect, expect));
    }

    #[test]
    fn ape_is_symmetric(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
        prop_assert_eq!(ape(a, b), ape(b, a));
        prop_assert!(ape(a, b) >= 0.0);
    }

    #[test]
    fn reason_restricted_universe_has_no_false_positives(m in kill_matrix(12), seed in any::<u64>()) {
        // Outcomes drawn from the matrix: killed pairs get a reason, others are live.
        let reasons = [Outcome::FAIL, Outcome::TIME, Outcome::EXC];
        let outcomes: KillMap = m
            .entries
            .iter()
            .enumerate()
            .map(|(i, (&k, &killed))| (k, if killed { reasons[(seed as usize + i) % 3] } else { Outcome::LIVE }))
            .collect();
        let r = eval_by_reason(&m, &outcomes).unwrap();
        for recall in [r.fail, r.time, r.exc].into_iter().flatten() {
            prop_assert_eq!(recall, 1.0);
        }
    }

    #[test]
    fn orders_are_permutations(kills in kill_sets(12, 10), seed in any::<u64>()) {
        let tests: Vec<u64> = kills.keys().copied().collect();
        for suite in [prioritize_total_sets(&kills, seed).unwrap(), prioritize_additional_sets(&kills, seed).unwrap()] {
            let mut o = suite.order.clone();
            o.sort_unstable();
            prop_assert_eq!(&o, &tests);
        }
        let total = prioritize_total_sets(&kills, seed).unwrap().order;
        prop_assert!(total.windows(2).all(|w| kills[&w[0]].len() >= kills[&w[1]].len()));
        prop_assert_eq!(prioritize_additional_sets(&kills, seed).unwrap(), prioritize_additional_sets(&kills, seed).unwrap());
    }

    #[test]
    fn apfd_is_strictly_inside_unit_interval(n in 1usize..30, faults in vec(vec(any::<prop::sample::Index>(), 1..4), 1..8)) {
        let order: Vec<u64> = (0..n as u64).collect();
        let faults: FaultMap = faults
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("f{i}"), d.iter().map(|ix| ix.index(n) as u64).collect()))
            .collect();
        let a = apfd(&order, &faults).unwrap().apfd;
        prop_assert!(a > 0.0 && a < 1.0, "apfd {}", a);
    }

    #[test]
    fn same_version_split_partitions(ids in btree_set(any::<u64>(), 10..300), seed in any::<u64>()) {
        let ids: Vec<u64> = ids.into_iter().collect();
        let s = split_same_version("p", &ids, seed).unwrap();
        let mut seen = BTreeSet::new();
        for k in s.train.iter().chain(&s.val).chain(&s.test) {
            prop_assert!(seen.insert(k.id), "mutant {} appears twice", k.id);
        }
        prop_assert_eq!(seen.into_iter().collect::<Vec<_>>(), ids.clone());
        prop_assert_eq!(s.train.len(), ids.len() * 8 / 10);
        prop_assert_eq!(s.val.len(), ids.len() / 10);
        prop_assert_eq!(split_same_version("p", &ids, seed).unwrap(), s);
    }

    #[test]
    fn diff_matches_lcs(a in tokens(), b in tokens()) {
        let d = diff_tokens(&a, &b);
        let l = lcs_len(&a, &b);
        prop_assert_eq!(d.removed.len(), a.len() - l);
        prop_assert_eq!(d.added.len(), b.len() - l);
        prop_assert!(is_subsequence(&d.removed, &a) && is_subsequence(&d.added, &b));
        let back = diff_tokens(&b, &a);
        prop_assert_eq!((back.removed.len(), back.added.len()), (d.added.len(), d.removed.len()));
    }

    #[test]
    fn min_max_hits_both_ends(raw in vec(-1e6f64..1e6, 2..30)) {
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi > lo);
        let n = min_max(&raw);
        let nlo = n.iter().copied().fold(f64::INFINITY, f64::min);
        let nhi = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!((nlo, nhi), (0.0, 1.0));
    }
}

#[test]
fn identical_pair_matrices_score_one() {
    let m = KillMatrix::new(BTreeMap::from([((1, 1), true), ((1, 2), false), ((2, 1), false)]));
    let p = eval_pairs(&m, &m).unwrap();
    assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
}
