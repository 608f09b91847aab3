//! Independent reimplementations checked against the library on small
//! fixtures.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use killmatrix_core::corpus::synth::{generate_synthetic_corpus, SynthConfig};
use killmatrix_core::corpus::CoverageMap;
use killmatrix_core::evaluation::{fewer_covered_f1, KillMatrix};
use killmatrix_core::extractor::{apply_scaler, extract_rows, fit_scaler, Project};
use killmatrix_core::models::{train_booster, train_forest, Binned, BoosterConfig, Dataset, ForestConfig};
use killmatrix_core::prioritization::{apfd_difference, faults_from_kills, Strategy};

fn kills_of(m: &KillMatrix) -> BTreeMap<u64, Vec<u64>> {
    let mut out: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for (&(mutant, t), &k) in &m.entries {
        let e = out.entry(t).or_default();
        if k {
            e.push(mutant);
        }
    }
    out
}

fn total_order(kills: &BTreeMap<u64, Vec<u64>>, seed: u64) -> Vec<u64> {
    let mut order: Vec<u64> = kills.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // Stable insertion sort by descending kill count.
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && kills[&order[j - 1]].len() < kills[&order[j]].len() {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    order
}

fn additional_order(kills: &BTreeMap<u64, Vec<u64>>, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left: Vec<u64> = kills.keys().copied().collect();
    let mut covered: Vec<u64> = Vec::new();
    let mut order = Vec::new();
    let gain = |t: u64, covered: &Vec<u64>| kills[&t].iter().filter(|m| !covered.contains(m)).count();
    while !left.is_empty() {
        let mut best = left.iter().map(|&t| gain(t, &covered)).max().unwrap();
        if best == 0 && !covered.is_empty() {
            covered.clear();
            best = left.iter().map(|&t| gain(t, &covered)).max().unwrap();
        }
        let tied: Vec<usize> = (0..left.len()).filter(|&i| gain(left[i], &covered) == best).collect();
        let t = left.remove(tied[rng.gen_range(0..tied.len())]);
        covered.extend(kills[&t].iter().copied());
        order.push(t);
    }
    order
}

fn apfd_by_hand(order: &[u64], faults: &BTreeMap<String, BTreeSet<u64>>) -> f64 {
    let n = order.len() as f64;
    let m = faults.len() as f64;
    let mut tf = 0.0;
    for detecting in faults.values() {
        tf += (order.iter().position(|t| detecting.contains(t)).unwrap() + 1) as f64;
    }
    1.0 - tf / (n * m) + 1.0 / (2.0 * n)
}

fn random_matrix(rng: &mut ChaCha8Rng, mutants: u64, tests: u64, p: f64) -> KillMatrix {
    let mut entries = BTreeMap::new();
    for m in 0..mutants {
        for t in 0..tests {
            if rng.gen_bool(0.7) {
                entries.insert((m, t), rng.gen_bool(p));
            }
        }
    }
    KillMatrix::new(entries)
}

#[test]
fn apfd_difference_matches_straightforward_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let mut checked = 0;
    while checked < 20 {
        let actual = random_matrix(&mut rng, 8, 6, 0.3);
        let faults = faults_from_kills(&actual);
        if faults.is_empty() || actual.tests().len() != 6 {
            continue;
        }
        // Perturb a few cells for the prediction, keeping the pair universe.
        let mut predicted = actual.clone();
        for v in predicted.entries.values_mut() {
            if rng.gen_bool(0.2) {
                *v = !*v;
            }
        }
        let seed: u64 = rng.gen();
        for strategy in [Strategy::Total, Strategy::Additional] {
            let got = apfd_difference(&predicted, &actual, &faults, strategy, 10, seed).unwrap();
            let (pk, ak) = (kills_of(&predicted), kills_of(&actual));
            let mut diffs = Vec::new();
            for r in 0..10u64 {
                let s = seed.wrapping_add(r);
                let (po, ao) = match strategy {
                    Strategy::Total => (total_order(&pk, s), total_order(&ak, s)),
                    Strategy::Additional => (additional_order(&pk, s), additional_order(&ak, s)),
                };
                assert_eq!(got.repeats[r as usize].predicted_order, po);
                assert_eq!(got.repeats[r as usize].actual_order, ao);
                diffs.push((apfd_by_hand(&po, &faults) - apfd_by_hand(&ao, &faults)).abs());
            }
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            assert!(
                (got.mean_abs_diff - mean).abs() < 1e-12,
                "{} vs {mean}",
                got.mean_abs_diff
            );
        }
        checked += 1;
    }
}

#[test]
fn fewer_covered_f1_matches_confusion_oracle() {
    // 60 covering tests, so the cutoff is 1.2 tests: only mutants covered
    // by a single test are selected.
    let cells: &[(u64, u64, bool, bool)] = &[
        // (mutant, test, predicted, actual)
        (1, 0, false, false),
        (2, 1, true, false),
        (3, 2, false, true),
        (4, 3, false, false),
        (5, 4, true, true),
        (5, 5, false, false),
    ];
    let mut coverage: CoverageMap = cells.iter().map(|&(m, t, _, _)| ((m, t), 1)).collect();
    for t in 6..60 {
        coverage.insert((99, t), 1);
    }
    let pred = KillMatrix::new(cells.iter().map(|&(m, t, p, _)| ((m, t), p)).collect());
    let actual = KillMatrix::new(cells.iter().map(|&(m, t, _, a)| ((m, t), a)).collect());

    let mut per_mutant: BTreeMap<u64, usize> = BTreeMap::new();
    for &(m, _) in coverage.keys() {
        *per_mutant.entry(m).or_default() += 1;
    }
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    let mut selected = 0;
    for m in 1..=5u64 {
        if per_mutant[&m] as f64 > 0.02 * 60.0 {
            continue;
        }
        selected += 1;
        let killed = |x: &KillMatrix| x.entries.iter().any(|(&(y, _), &k)| y == m && k);
        let (p_surv, a_surv) = (!killed(&pred), !killed(&actual));
        match (p_surv, a_surv) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            (false, false) => {}
        }
    }
    let f1 = 2.0 * tp / (2.0 * tp + fp + fn_);

    let got = fewer_covered_f1(&pred, &actual, &coverage, 0.02).unwrap();
    assert_eq!(got.covering_tests, 60);
    assert_eq!(got.mutants, selected);
    assert_eq!(selected, 4);
    assert!((got.f1.unwrap() - f1).abs() < 1e-12);
}

#[test]
fn scaler_centres_training_features() {
    let synth = generate_synthetic_corpus(&SynthConfig {
        mutants: 300,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap();
    let rows = extract_rows(&Project::from_sources(&synth.sources).unwrap(), &synth.corpus).unwrap();
    let stats = fit_scaler(rows.iter().map(|r| &r.features));
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| apply_scaler(&stats, &r.features).numeric).collect();
    let n = scaled.len() as f64;
    for j in 0..stats.indices.len() {
        let mean = scaled.iter().map(|v| v[j]).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9, "{}: mean {mean}", stats.names[j]);
        let var = scaled.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n;
        let constant = rows
            .iter()
            .all(|r| apply_scaler(&stats, &r.features).numeric[j] == scaled[0][j]);
        if !constant {
            assert!(
                (var.sqrt() - 1.0).abs() < 1e-9,
                "{}: std {}",
                stats.names[j],
                var.sqrt()
            );
        }
    }
}

fn separable() -> Dataset {
    // Class is x0 > 0; x1 is noise.
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 9.5, ((i * 7) % 5) as f64]).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r[0] > 0.0).collect();
    Dataset::from_rows(&rows, &labels).unwrap()
}

#[test]
fn booster_fits_separable_fixture() {
    let data = separable();
    let cfg = BoosterConfig {
        iterations: 50,
        learning_rate: 0.1,
        min_leaf: 1,
        ..BoosterConfig::default()
    };
    let b = train_booster(&data, &Binned::new(&data, 255), &cfg).unwrap();
    let correct = (0..data.n_rows())
        .filter(|&i| (b.predict(&data.row(i)) >= 0.5) == data.labels[i])
        .count();
    assert_eq!(correct, data.n_rows());
}

#[test]
fn forest_threshold_is_majority_vote_on_pure_leaves() {
    let data = separable();
    let cfg = ForestConfig {
        trees: 25,
        ..ForestConfig::default()
    };
    let forest = train_forest(&data, &Binned::new(&data, 255), &cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = vec![rng.gen_range(-12.0..12.0), rng.gen_range(0.0..5.0)];
        let trace = forest.trace(&x);
        assert!(trace.iter().all(|&v| v == 0.0 || v == 1.0));
        let votes = trace.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(forest.predict(&x) >= 0.5, 2 * votes >= trace.len());
    }
}
