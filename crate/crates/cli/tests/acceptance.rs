//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use killmatrix_core::corpus::{Corpus, SOURCE_DIR};
use killmatrix_core::extractor::{extract_rows, skeleton_modification, statement_diff, Project, FEATURE_NAMES};
use killmatrix_core::models::{
    combine, train_booster, train_forest, Binned, BoosterConfig, Dataset, ForestConfig, TreeEnsemblePair,
};
use killmatrix_core::prioritization::{apfd, prioritize_additional_sets, FaultMap, KillSets};
use killmatrix_core::thresholds::{candidates, confusion, optimize_threshold};

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

const BIN: &str = env!("CARGO_BIN_EXE_killmatrix");

/// Corpus size for the learnability, importance and noise criteria: about
/// 51k covered pairs at two tests per mutant.
const LEARN_MUTANTS: usize = 34_000;

fn killmatrix(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| format!("spawning {BIN}: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`killmatrix {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("temporary paths are UTF-8")
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v.pointer(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("missing {key}"))
}

fn synth_corpus(dir: &Path, mutants: usize, noise: f64, seed: u64) -> Result<PathBuf, String> {
    let corpus = dir.join(format!("corpus-{seed}-{noise}"));
    killmatrix(&[
        "synth",
        "--out",
        path_str(&corpus),
        "--mutants",
        &mutants.to_string(),
        "--noise",
        &noise.to_string(),
        "--seed",
        &seed.to_string(),
    ])?;
    Ok(corpus)
}

fn experiment(dir: &Path, corpus: &Path, seed: u64, out: &Path, extra: &[&str]) -> Result<Value, String> {
    let cfg = dir.join(format!("config-{seed}.json"));
    let body = serde_json::json!({
        "scenario": "same_version",
        "corpora": [corpus],
        "seed": seed,
    });
    std::fs::write(&cfg, body.to_string()).map_err(|e| e.to_string())?;
    let mut args = vec!["experiment", "--config", path_str(&cfg), "--out", path_str(out)];
    args.extend_from_slice(extra);
    killmatrix(&args)?;
    read_json(&out.join("eval_report.json"))
}

// 1

fn golden_features() -> Check {
    let start = Instant::now();
    let skeleton = |b: &str, a: &str| -> Result<(String, String), String> {
        skeleton_modification(b, a)
            .map_err(|e| e.to_string())?
            .0
            .ok_or_else(|| format!("no skeleton for `{b}` -> `{a}`"))
    };
    let cases = [
        ("a == b", "false", "expr1 == expr2", "expr"),
        ("a == b", "a != b", "expr1 == expr2", "expr1 != expr2"),
        (
            "allStringsNull || longestStrLen == 0 && !anyStringNull",
            "longestStrLen == 0 && !anyStringNull",
            "expr1 || expr2 && expr3",
            "expr1 && expr2",
        ),
        (
            "src.length > srcPos + 1 && src[srcPos + 1]",
            "false && src[srcPos + 1]",
            "(expr1 > expr2) && expr3",
            "expr1 && expr2",
        ),
    ];
    for (before, after, want_b, want_a) in cases {
        let got = skeleton(before, after)?;
        ensure!(
            got == (want_b.into(), want_a.into()),
            "`{before}` -> `{after}` gave {got:?}"
        );
    }
    let diff = statement_diff("a <= b", "a >= b").map_err(|e| e.to_string())?;
    ensure!(diff.to_string() == "['<=', '>=']", "diff rendered as {diff}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "{} skeleton cases and the diff case in {elapsed:.1?}",
        cases.len()
    ))
}

// 2

struct Counts {
    tp: f64,
    fp: f64,
    fn_: f64,
    tn: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn count(scores: &[f64], labels: &[bool], theta: f64) -> Counts {
    let mut c = Counts {
        tp: 0.0,
        fp: 0.0,
        fn_: 0.0,
        tn: 0.0,
    };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= theta, y) {
            (true, true) => c.tp += 1.0,
            (true, false) => c.fp += 1.0,
            (false, true) => c.fn_ += 1.0,
            (false, false) => c.tn += 1.0,
        }
    }
    c
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(1..=200);
    let prevalence: f64 = rng.gen();
    let scores = (0..n).map(|_| rng.gen::<f64>()).collect();
    let labels = (0..n).map(|_| rng.gen_bool(prevalence)).collect();
    (scores, labels)
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let (scores, labels) = random_instance(&mut rng);
        let theta = if i % 2 == 0 {
            candidates()[rng.gen_range(0..10)]
        } else {
            rng.gen()
        };
        let c = count(&scores, &labels, theta);
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let fpr = ratio(c.fp, c.fp + c.tn);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        let j = recall - fpr;
        let got = confusion(&scores, &labels, theta).map_err(|e| e.to_string())?;
        for (name, a, b) in [
            ("precision", got.precision(), precision),
            ("recall", got.recall(), recall),
            ("fpr", got.fpr(), fpr),
            ("f1", got.f1(), f1),
            ("j", got.youden_j(), j),
        ] {
            let d = (a - b).abs();
            ensure!(d <= 1e-12, "instance {i}: {name} {a} vs {b}");
            worst = worst.max(d);
        }
    }
    Ok(format!("1000 instances, max deviation {worst:e}"))
}

// 3

fn standardize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    xs.iter()
        .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
        .collect()
}

fn threshold_optimizer() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let mut attempts = 0;
    while agree < 100 {
        attempts += 1;
        let (scores, labels) = random_instance(&mut rng);
        if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
            continue;
        }
        let (mut f1, mut j) = (Vec::new(), Vec::new());
        for theta in candidates() {
            let c = count(&scores, &labels, theta);
            let p = ratio(c.tp, c.tp + c.fp);
            let r = ratio(c.tp, c.tp + c.fn_);
            f1.push(ratio(2.0 * p * r, p + r));
            j.push(r - ratio(c.fp, c.fp + c.tn));
        }
        let s: Vec<f64> = standardize(&f1)
            .iter()
            .zip(standardize(&j))
            .map(|(a, b)| a + b)
            .collect();
        let mut best = 0;
        for k in 1..s.len() {
            if s[k] > s[best] {
                best = k;
            }
        }
        let got = optimize_threshold(&scores, &labels)
            .map_err(|e| e.to_string())?
            .selected;
        ensure!(
            got == candidates()[best],
            "set {attempts}: selected {got}, brute force {}",
            candidates()[best]
        );
        agree += 1;
    }
    Ok(format!("{agree}/100 validation sets agree"))
}

// 4

fn apfd_by_area(order: &[u64], faults: &FaultMap) -> f64 {
    let (n, m) = (order.len() as f64, faults.len() as f64);
    let mut detected = 0.0;
    for i in 1..=order.len() {
        let prefix: BTreeSet<u64> = order[..i].iter().copied().collect();
        detected += faults.values().filter(|d| !d.is_disjoint(&prefix)).count() as f64;
    }
    detected / (n * m) - 1.0 / (2.0 * n)
}

fn apfd_eq(order: &[u64], faults: &FaultMap) -> f64 {
    let (n, m) = (order.len() as f64, faults.len() as f64);
    let tf: usize = faults
        .values()
        .map(|d| order.iter().position(|t| d.contains(t)).expect("detectable") + 1)
        .sum();
    1.0 - tf as f64 / (n * m) + 1.0 / (2.0 * n)
}

fn permutations(items: &[u64]) -> Vec<Vec<u64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn apfd_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut orders = 0usize;
    for n in 1..=6u64 {
        for _ in 0..5 {
            let tests: Vec<u64> = (0..n).collect();
            let mut faults = FaultMap::new();
            for f in 0..rng.gen_range(1..=5) {
                let mut detecting: BTreeSet<u64> = tests.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
                detecting.insert(rng.gen_range(0..n));
                faults.insert(format!("f{f}"), detecting);
            }
            for order in permutations(&tests) {
                let got = apfd(&order, &faults).map_err(|e| e.to_string())?.apfd;
                let closed = apfd_eq(&order, &faults);
                let area = apfd_by_area(&order, &faults);
                ensure!(
                    (got - closed).abs() <= 1e-12,
                    "{order:?}: {got} vs closed form {closed}"
                );
                ensure!((got - area).abs() <= 1e-12, "{order:?}: {got} vs area {area}");
                orders += 1;
            }
        }
    }
    let one = FaultMap::from([("f".to_string(), BTreeSet::from([0]))]);
    let a = apfd(&[0, 1, 2, 3], &one).map_err(|e| e.to_string())?.apfd;
    ensure!(a == 0.875, "four tests, fault at rank 1: {a}");
    let two = FaultMap::from([
        ("f1".to_string(), BTreeSet::from([0])),
        ("f2".to_string(), BTreeSet::from([2])),
    ]);
    let b = apfd(&(0..10).collect::<Vec<_>>(), &two)
        .map_err(|e| e.to_string())?
        .apfd;
    ensure!(b == 0.85, "ten tests, faults at ranks 1 and 3: {b}");
    Ok(format!("{orders} orders match; 0.875 and 0.85 exact"))
}

// 5

fn additional_greedy() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut steps = 0usize;
    for case in 0..200u64 {
        let (n_tests, n_mutants) = (rng.gen_range(1..=8u64), rng.gen_range(1..=8u64));
        let density: f64 = rng.gen_range(0.0..0.8);
        let kills: KillSets = (0..n_tests)
            .map(|t| (t, (0..n_mutants).filter(|_| rng.gen_bool(density)).collect()))
            .collect();
        let order = prioritize_additional_sets(&kills, case)
            .map_err(|e| e.to_string())?
            .order;
        let mut sorted = order.clone();
        sorted.sort_unstable();
        ensure!(
            sorted == (0..n_tests).collect::<Vec<_>>(),
            "case {case}: order {order:?} is not a permutation"
        );
        // Replay the order, checking each pick against every remaining test.
        let mut killed: BTreeSet<u64> = BTreeSet::new();
        let mut remaining: BTreeSet<u64> = (0..n_tests).collect();
        for &t in &order {
            let gain = |x: u64, killed: &BTreeSet<u64>| kills[&x].difference(killed).count();
            let best = |killed: &BTreeSet<u64>| remaining.iter().map(|&x| gain(x, killed)).max().unwrap_or(0);
            if best(&killed) == 0 && !killed.is_empty() {
                // Reset point; later picks are checked against a fresh killed set.
                killed.clear();
            }
            let (g, b) = (gain(t, &killed), best(&killed));
            ensure!(g == b, "case {case}: picked test {t} with gain {g} < {b}");
            killed.extend(kills[&t].iter().copied());
            remaining.remove(&t);
            steps += 1;
        }
    }

    // t0 and t1 cover everything; t2 then gains nothing until the reset,
    // after which it beats t3.
    let fixture: KillSets = BTreeMap::from([
        (0, BTreeSet::from([1, 2, 3])),
        (1, BTreeSet::from([4])),
        (2, BTreeSet::from([1, 2])),
        (3, BTreeSet::from([3])),
        (4, BTreeSet::new()),
    ]);
    for seed in 0..20 {
        let order = prioritize_additional_sets(&fixture, seed)
            .map_err(|e| e.to_string())?
            .order;
        ensure!(order == [0, 1, 2, 3, 4], "seed {seed}: reset fixture ordered {order:?}");
    }
    Ok(format!(
        "{steps} greedy steps maximal over 200 matrices; reset fixture holds"
    ))
}

// 6

fn ensemble_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        let c = combine(a, b).map_err(|e| e.to_string())?;
        ensure!((c - (a + b) / 2.0).abs() <= 1e-15, "combine({a}, {b}) = {c}");
    }

    let rows: Vec<Vec<f64>> = (0..600)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let labels: Vec<bool> = rows
        .iter()
        .map(|r| r[0] + 0.5 * r[1] * r[2] + rng.gen_range(-0.3..0.3) > 0.0)
        .collect();
    let data = Dataset::from_rows(&rows, &labels).map_err(|e| e.to_string())?;
    let binned = Binned::new(&data, 64);
    let forest_cfg = ForestConfig {
        trees: 40,
        ..ForestConfig::default()
    };
    let forest = train_forest(&data, &binned, &forest_cfg, 6).map_err(|e| e.to_string())?;
    let booster_cfg = BoosterConfig {
        iterations: 60,
        ..BoosterConfig::default()
    };
    let booster = train_booster(&data, &binned, &booster_cfg).map_err(|e| e.to_string())?;

    for x in &rows {
        let trace = forest.trace(x);
        let mean = trace.iter().sum::<f64>() / trace.len() as f64;
        ensure!(
            (forest.predict(x) - mean).abs() <= 1e-12,
            "forest {} vs trace mean {mean}",
            forest.predict(x)
        );
        for t in &forest.trees {
            ensure!(
                t.predict(x) == t.predict_nodes(x),
                "compiled tree disagrees with node traversal"
            );
        }
        let mut z = booster.base_score;
        for (m, tree) in booster.trees.iter().enumerate() {
            z += booster.learning_rate * tree.predict_nodes(x);
            let at = booster.raw_score_at(x, m + 1);
            ensure!((at - z).abs() <= 1e-12, "booster step {}: {at} vs {z}", m + 1);
        }
        let p = 1.0 / (1.0 + (-z).exp());
        ensure!(
            (booster.predict(x) - p).abs() <= 1e-12,
            "booster probability {} vs {p}",
            booster.predict(x)
        );
    }
    Ok(format!(
        "10000 combine pairs; {} forest traces and {}-step booster telescoping",
        rows.len(),
        booster.trees.len()
    ))
}

// 7, 8

struct CleanRun {
    corpus: PathBuf,
    model: PathBuf,
}

fn learnability(dir: &Path) -> (Check, Option<CleanRun>) {
    let start = Instant::now();
    let run = || -> Result<(String, CleanRun), String> {
        let corpus = synth_corpus(dir, LEARN_MUTANTS, 0.0, 7)?;
        let out = dir.join("clean-run");
        let report = experiment(dir, &corpus, 7, &out, &[])?;
        let elapsed = start.elapsed();
        let pairs = num(&report, "/pairs")? as usize;
        let manifest = read_json(&out.join("manifest.json"))?;
        let total_pairs: u64 = manifest["pairs"]
            .as_object()
            .ok_or("manifest has no pair counts")?
            .values()
            .filter_map(Value::as_u64)
            .sum();
        let f1 = num(&report, "/pair_level/f1")?;
        ensure!(total_pairs >= 50_000, "corpus has only {total_pairs} pairs");
        ensure!(f1 >= 0.95, "kill-matrix F1 {f1:.4}");
        ensure!(elapsed < Duration::from_secs(60), "full run took {elapsed:.1?}");
        Ok((
            format!("F1 {f1:.4} on {pairs} test pairs of {total_pairs}; synth + experiment {elapsed:.1?}"),
            CleanRun {
                corpus,
                model: out.join("model.json"),
            },
        ))
    };
    match run() {
        Ok((msg, clean)) => (Ok(msg), Some(clean)),
        Err(e) => (Err(e), None),
    }
}

fn importance_sanity(dir: &Path, clean: Option<&CleanRun>) -> Check {
    let clean = clean.ok_or("criterion 7 produced no model")?;
    let out = dir.join("importance.json");
    killmatrix(&["importance", "--model", path_str(&clean.model), "--out", path_str(&out)])?;
    let report = read_json(&out)?;
    let mut tops = Vec::new();
    for model in ["forest", "booster"] {
        let values: Vec<f64> = report["mean"][model]
            .as_array()
            .ok_or(format!("no mean {model} importance"))?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        ensure!(
            values.len() == FEATURE_NAMES.len(),
            "{model}: {} importances",
            values.len()
        );
        let top = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
        ensure!(
            FEATURE_NAMES[top] == "statement_diff",
            "{model}: top feature is {} ({:.3})",
            FEATURE_NAMES[top],
            values[top]
        );
        let runner_up = (0..values.len())
            .filter(|&i| i != top)
            .map(|i| values[i])
            .fold(0.0, f64::max);
        tops.push(format!(
            "{model} statement_diff {:.3} (next {runner_up:.3})",
            values[top]
        ));
    }
    Ok(tops.join("; "))
}

// 9

fn noisy_consistency(dir: &Path) -> Check {
    let mut apes = Vec::new();
    for seed in 0..5 {
        let corpus = synth_corpus(dir, LEARN_MUTANTS, 0.1, seed)?;
        let out = dir.join(format!("noisy-run-{seed}"));
        let report = experiment(dir, &corpus, seed, &out, &["--repeats", "2"])?;
        let ape = num(&report, "/ape")?;
        ensure!(ape <= 10.0, "seed {seed}: APE {ape:.2} points");
        apes.push(format!("{ape:.2}"));
        std::fs::remove_dir_all(&corpus).ok();
    }
    Ok(format!("APE per seed [{}] <= 10", apes.join(", ")))
}

// 10

fn prediction_speed(clean: Option<&CleanRun>) -> Check {
    let clean = clean.ok_or("criterion 7 produced no model")?;
    let model = TreeEnsemblePair::load(&clean.model).map_err(|e| e.to_string())?;
    let corpus = Corpus::load_dir(&clean.corpus).map_err(|e| e.to_string())?;
    let project = Project::load_dir(&clean.corpus.join(SOURCE_DIR)).map_err(|e| e.to_string())?;
    let rows = extract_rows(&project, &corpus).map_err(|e| e.to_string())?;
    let mut features: Vec<_> = rows.iter().cycle().take(100_000).map(|r| r.features.clone()).collect();
    features.shuffle(&mut ChaCha8Rng::seed_from_u64(10));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let scores = pool.install(|| model.predict_all(&features));
    let elapsed = start.elapsed();
    ensure!(scores.len() == 100_000, "{} scores", scores.len());
    ensure!(
        elapsed < Duration::from_secs(10),
        "100000 predictions took {elapsed:.2?}"
    );
    Ok(format!("100000 pairs in {elapsed:.2?} on one thread"))
}

// 11

fn determinism(dir: &Path) -> Check {
    let corpus = synth_corpus(dir, 3000, 0.05, 11)?;
    let a = dir.join("det-a");
    let b = dir.join("det-b");
    experiment(dir, &corpus, 11, &a, &["--threads", "1"])?;
    experiment(dir, &corpus, 11, &b, &["--threads", "4"])?;
    for file in ["eval_report.json", "prioritization.csv"] {
        let x = std::fs::read(a.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let y = std::fs::read(b.join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure!(!x.is_empty() && x == y, "{file} differs between runs");
    }
    Ok("eval_report.json and prioritization.csv byte-identical across 1 and 4 threads".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let dir = dir.path();
    let mut results: Vec<(u32, &str, Check)> = vec![
        (1, "golden features", golden_features()),
        (2, "metric oracle", metric_oracle()),
        (3, "threshold optimizer", threshold_optimizer()),
        (4, "APFD", apfd_check()),
        (5, "additional prioritization", additional_greedy()),
        (6, "ensemble identities", ensemble_identities()),
    ];
    let (learn, clean) = learnability(dir);
    results.push((7, "end-to-end learnability", learn));
    results.push((8, "importance sanity", importance_sanity(dir, clean.as_ref())));
    results.push((9, "mutation-score consistency", noisy_consistency(dir)));
    results.push((10, "prediction speed", prediction_speed(clean.as_ref())));
    results.push((11, "determinism", determinism(dir)));

    let mut failed = 0;
    for (n, name, result) in &results {
        match result {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
