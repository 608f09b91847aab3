use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use killmatrix_core::corpus::synth::{generate_synthetic_corpus, kill_rate, LabelRule, SynthConfig};
use killmatrix_core::corpus::{
    ingest_coverage, ingest_kill_map, ingest_mutant_log, ingest_tests, Corpus, CorpusIds, CoverageMap, KillMap,
    LogFormat, COVERAGE_FILE, KILLMAP_FILE, MUTANTS_FILE, SOURCE_DIR, TESTS_FILE,
};
use killmatrix_core::evaluation::{evaluate, KillMatrix};
use killmatrix_core::experiment::{
    corpus_tags, make_split, outcomes, run_experiment, write_predicted_matrix, ExperimentConfig, ExperimentScenario,
};
use killmatrix_core::extractor::{extract_rows, read_features, write_features, PairRow, Project, FEATURE_NAMES};
use killmatrix_core::io::{read_json, write_json};
use killmatrix_core::models::{
    aggregate_importances, AggregatedImportance, ImportanceReport, ModelConfig, TreeEnsemblePair,
};
use killmatrix_core::prioritization::{
    apfd_difference, faults_from_kills, prioritize, write_prioritization_csv, FaultMap, PrioritizedSuite, Strategy,
};
use killmatrix_core::thresholds::{optimize_threshold, ThresholdMode, ThresholdReport, DEFAULT_FIXED_THRESHOLD};

use crate::*;

/// Bad invocation or missing input; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn input(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("input not found: {}", path.display())))
    }
}

/// `$KILLMATRIX_OUT`, else the working directory.
fn default_dir() -> PathBuf {
    std::env::var_os("KILLMATRIX_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn out_file(given: Option<PathBuf>, name: &str) -> PathBuf {
    given.unwrap_or_else(|| default_dir().join(name))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Extract(a) => extract(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Tune(a) => tune(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Importance(a) => importance(a),
        Command::Prioritize(a) => prioritize_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Synth(a) => synth(a),
    }
}

fn copy_java_tree(from: &Path, to: &Path) -> Result<usize> {
    let mut copied = 0;
    for entry in fs::read_dir(from).with_context(|| format!("reading {}", from.display()))? {
        let path = entry?.path();
        let target = to.join(path.file_name().expect("directory entries have names"));
        if path.is_dir() {
            copied += copy_java_tree(&path, &target)?;
        } else if path.extension().is_some_and(|x| x == "java") {
            fs::create_dir_all(to)?;
            fs::copy(&path, &target).with_context(|| format!("copying {}", path.display()))?;
            copied += 1;
        }
    }
    Ok(copied)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let format = match a.format {
        MutantFormat::Canonical => LogFormat::Canonical,
        MutantFormat::Major => LogFormat::MajorLog,
    };
    if !input(&a.src)?.is_dir() {
        return Err(usage(format!("--src must be a directory: {}", a.src.display())));
    }
    let corpus = Corpus {
        mutants: ingest_mutant_log(input(&a.mutants)?, format)?,
        tests: ingest_tests(input(&a.tests)?)?,
        coverage: ingest_coverage(input(&a.coverage)?)?,
        kills: match &a.kills {
            Some(p) => ingest_kill_map(input(p)?)?,
            None => KillMap::new(),
        },
    };
    let pairs = corpus.pairs()?;
    corpus.write_dir(&a.out)?;
    let files = copy_java_tree(&a.src, &a.out.join(SOURCE_DIR))?;
    let killed = pairs.iter().filter(|p| p.outcome.is_killed()).count();
    println!(
        "{} mutants ({} covered), {} tests, {} pairs ({} killed), {} source files -> {}",
        corpus.mutants.len(),
        corpus.covered_mutants().len(),
        corpus.tests.len(),
        pairs.len(),
        killed,
        files,
        a.out.display()
    );
    Ok(())
}

fn pick(explicit: Option<PathBuf>, corpus: Option<&Path>, name: &str) -> Option<PathBuf> {
    explicit.or_else(|| corpus.map(|c| c.join(name)))
}

fn extract(a: ExtractArgs) -> Result<()> {
    let corpus_dir = a.corpus.as_deref();
    if let Some(c) = corpus_dir {
        input(c)?;
    }
    let src = pick(a.src, corpus_dir, SOURCE_DIR).ok_or_else(|| usage("missing --src (or --corpus)"))?;
    let mutants = pick(a.mutants, corpus_dir, MUTANTS_FILE).ok_or_else(|| usage("missing --mutants (or --corpus)"))?;
    let coverage =
        pick(a.coverage, corpus_dir, COVERAGE_FILE).ok_or_else(|| usage("missing --coverage (or --corpus)"))?;
    let sibling = |name: &str| mutants.parent().unwrap_or(Path::new("")).join(name);
    let tests = a.tests.unwrap_or_else(|| sibling(TESTS_FILE));
    let kills = a.kills.or_else(|| Some(sibling(KILLMAP_FILE)).filter(|p| p.exists()));
    let corpus = Corpus {
        mutants: ingest_mutant_log(input(&mutants)?, LogFormat::Canonical)?,
        tests: ingest_tests(input(&tests)?)?,
        coverage: ingest_coverage(input(&coverage)?)?,
        kills: match &kills {
            Some(p) => ingest_kill_map(input(p)?)?,
            None => KillMap::new(),
        },
    };
    let start = Instant::now();
    let project = Project::load_dir(input(&src)?)?;
    let rows = extract_rows(&project, &corpus)?;
    let out = out_file(a.out, "features.csv");
    write_features(&out, &rows)?;
    println!(
        "extracted {} pairs of {} covered mutants from {} files in {:.3}s -> {}",
        rows.len(),
        corpus.covered_mutants().len(),
        project.files().len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn scenario(s: ScenarioArg) -> ExperimentScenario {
    match s {
        ScenarioArg::SameVersion => ExperimentScenario::SameVersion,
        ScenarioArg::CrossVersion => ExperimentScenario::CrossVersion,
        ScenarioArg::CrossProject => ExperimentScenario::CrossProject,
    }
}

fn split(a: SplitArgs) -> Result<()> {
    let tables = a
        .features
        .iter()
        .map(|p| read_features(input(p)?).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let tags = corpus_tags(&a.features);
    let ids: Vec<CorpusIds> = tags
        .iter()
        .zip(&tables)
        .map(|(tag, rows)| CorpusIds {
            tag: tag.clone(),
            ids: rows
                .iter()
                .map(|r| r.mutant_id)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        })
        .collect();
    let split = make_split(scenario(a.scenario), &ids, a.seed).map_err(|e| usage(e.to_string()))?;
    let out = a.out_dir.unwrap_or_else(default_dir);
    write_json(&out.join("split.json"), &split)?;
    for (name, keys) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        let wanted: BTreeSet<(&str, u64)> = keys.iter().map(|k| (k.corpus.as_str(), k.id)).collect();
        let rows: Vec<PairRow> = tags
            .iter()
            .zip(&tables)
            .flat_map(|(tag, rows)| rows.iter().filter(|r| wanted.contains(&(tag.as_str(), r.mutant_id))))
            .cloned()
            .collect();
        write_features(&out.join(format!("{name}.csv")), &rows)?;
        println!("{name}: {} mutants, {} pairs", keys.len(), rows.len());
    }
    println!("split written to {}", out.display());
    Ok(())
}

fn xy(rows: &[PairRow]) -> (Vec<killmatrix_core::extractor::FeatureVector>, Vec<bool>) {
    (
        rows.iter().map(|r| r.features.clone()).collect(),
        rows.iter().map(PairRow::killed).collect(),
    )
}

fn print_top(report: &ImportanceReport, n: usize) {
    for (label, imp) in [
        ("forest", &report.forest.normalized),
        ("booster", &report.booster.normalized),
    ] {
        let mut order: Vec<usize> = (0..imp.len()).collect();
        order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
        let top: Vec<String> = order
            .iter()
            .take(n)
            .map(|&i| format!("{} {:.3}", report.features[i], imp[i]))
            .collect();
        println!("{label}: {}", top.join(", "));
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let rows = read_features(input(&a.features)?)?;
    let mut cfg: ModelConfig = match &a.config {
        Some(p) => read_json(input(p)?)?,
        None => ModelConfig::default(),
    };
    if let Some(t) = a.trees {
        cfg.forest.trees = t;
    }
    if let Some(i) = a.iterations {
        cfg.booster.iterations = i;
    }
    let (x, y) = xy(&rows);
    let start = Instant::now();
    let model = TreeEnsemblePair::train(&x, &y, &cfg, a.seed)?;
    let out = out_file(a.out, "model.json");
    model.save(&out)?;
    println!(
        "trained on {} pairs in {:.3}s -> {}",
        rows.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    print_top(&model.importance(), 3);
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let model = TreeEnsemblePair::load(input(&a.model)?)?;
    let rows = read_features(input(&a.val)?)?;
    let (x, y) = xy(&rows);
    let report = optimize_threshold(&model.predict_all(&x), &y)?;
    let out = out_file(a.out, "threshold_report.json");
    write_json(&out, &report)?;
    println!("selected threshold {} -> {}", report.selected, out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let theta = match (&a.threshold, &a.threshold_report) {
        (Some(t), _) => *t,
        (None, Some(p)) => read_json::<ThresholdReport>(input(p)?)?.selected,
        (None, None) => DEFAULT_FIXED_THRESHOLD,
    };
    if !(0.0..=1.0).contains(&theta) {
        return Err(usage(format!("threshold {theta} is outside [0, 1]")));
    }
    let model = TreeEnsemblePair::load(input(&a.model)?)?;
    let rows = read_features(input(&a.features)?)?;
    let (x, _) = xy(&rows);
    // Model loading is excluded from the timing.
    let start = Instant::now();
    let scores = model.predict_all(&x);
    let elapsed = start.elapsed().as_secs_f64();
    let out = out_file(a.out, "predicted_matrix.csv");
    write_predicted_matrix(&out, &rows, &scores, theta)?;
    let killed = scores.iter().filter(|&&s| s >= theta).count();
    println!(
        "predicted {} pairs ({} killed at threshold {theta}) in {elapsed:.3}s -> {}",
        rows.len(),
        killed,
        out.display()
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let predicted = KillMatrix::read_csv(input(&a.predicted)?)?;
    let rows = read_features(input(&a.actual)?)?;
    let actual = KillMatrix::from_rows(&rows);
    let coverage: CoverageMap = match &a.coverage {
        Some(p) => ingest_coverage(input(p)?)?,
        None => rows
            .iter()
            .map(|r| ((r.mutant_id, r.test_id), r.features.hits_number))
            .collect(),
    };
    let report = evaluate(&predicted, &actual, &outcomes(&rows), &coverage, a.fewer_covered_ratio)?;
    let out = out_file(a.out, "eval_report.json");
    write_json(&out, &report)?;
    if let Some(csv) = &a.csv {
        let name = a
            .predicted
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        report.write_csv(csv, &name)?;
    }
    println!(
        "pair F1 {:.4}  mutant F1 {:.4}  pms {:.2}  ams {:.2}  APE {:.2} -> {}",
        report.pair_level.f1,
        report.mutant_level.f1,
        report.predicted_mutation_score,
        report.actual_mutation_score,
        report.ape,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ImportanceOutput {
    models: Vec<ImportanceReport>,
    mean: AggregatedImportance,
}

fn importance(a: ImportanceArgs) -> Result<()> {
    let models: Vec<ImportanceReport> = a
        .models
        .iter()
        .map(|p| Ok(TreeEnsemblePair::load(input(p)?)?.importance()))
        .collect::<Result<_>>()?;
    let mean = aggregate_importances(&models)?;
    let out = out_file(a.out, "importance.json");
    for (path, r) in a.models.iter().zip(&models) {
        println!("{}", path.display());
        print_top(r, a.top);
    }
    if models.len() > 1 {
        let as_report = ImportanceReport::new(mean.features.clone(), mean.forest.clone(), mean.booster.clone());
        println!("mean over {} models", models.len());
        print_top(&as_report, a.top);
    }
    write_json(&out, &ImportanceOutput { models, mean })?;
    Ok(())
}

fn strategies(s: StrategyArg) -> Vec<Strategy> {
    match s {
        StrategyArg::Total => vec![Strategy::Total],
        StrategyArg::Additional => vec![Strategy::Additional],
        StrategyArg::Both => vec![Strategy::Total, Strategy::Additional],
    }
}

fn prioritize_cmd(a: PrioritizeArgs) -> Result<()> {
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let predicted = KillMatrix::read_csv(input(&a.predicted)?)?;
    let out = a.out_dir.unwrap_or_else(default_dir);
    let Some(actual_path) = &a.actual else {
        let suites: Vec<PrioritizedSuite> = strategies(a.strategy)
            .into_iter()
            .map(|s| prioritize(&predicted, s, a.seed))
            .collect::<killmatrix_core::Result<_>>()?;
        write_json(&out.join("order.json"), &suites)?;
        println!(
            "ordered {} tests -> {}",
            predicted.tests().len(),
            out.join("order.json").display()
        );
        return Ok(());
    };
    let actual = KillMatrix::from_rows(&read_features(input(actual_path)?)?);
    let faults: FaultMap = match &a.faults {
        Some(p) => read_json(input(p)?)?,
        None => faults_from_kills(&actual),
    };
    if faults.is_empty() {
        bail!("no faults: the actual matrix kills nothing and no --faults file was given");
    }
    let results = strategies(a.strategy)
        .into_iter()
        .map(|s| apfd_difference(&predicted, &actual, &faults, s, a.repeats, a.seed))
        .collect::<killmatrix_core::Result<Vec<_>>>()?;
    write_prioritization_csv(&out.join("prioritization.csv"), &results)?;
    write_json(&out.join("order.json"), &results)?;
    for r in &results {
        println!(
            "{}: mean |APFD difference| {:.4} over {} repeats",
            r.strategy.as_str(),
            r.mean_abs_diff,
            a.repeats
        );
    }
    println!("written to {}", out.display());
    Ok(())
}

fn parse_threshold(s: &str) -> Result<ThresholdMode> {
    if s.eq_ignore_ascii_case("tuned") {
        return Ok(ThresholdMode::Tuned);
    }
    match s.parse::<f64>() {
        Ok(theta) if (0.0..=1.0).contains(&theta) => Ok(ThresholdMode::Fixed { theta }),
        _ => Err(usage(format!(
            "--threshold expects `tuned` or a value in [0, 1], got `{s}`"
        ))),
    }
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(input(&a.config)?).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(t) = &a.threshold {
        cfg.threshold = parse_threshold(t)?;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    cfg.ablation |= a.ablation;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    for c in &cfg.corpora {
        input(c)?;
    }
    let out = match a.out.or_else(|| cfg.output_dir.clone()) {
        Some(o) => o,
        None => default_dir().join(format!("run-{}", &cfg.hash()?[..12])),
    };
    cfg.output_dir = Some(out.clone());
    let result = run_experiment(&cfg, &out)?;
    let r = &result.eval.report;
    println!(
        "threshold {}  pair P/R/F1 {:.4}/{:.4}/{:.4}  mutant F1 {:.4}",
        result.eval.threshold, r.pair_level.precision, r.pair_level.recall, r.pair_level.f1, r.mutant_level.f1
    );
    println!(
        "pms {:.2}  ams {:.2}  APE {:.2}",
        r.predicted_mutation_score, r.actual_mutation_score, r.ape
    );
    for (strategy, d) in &result.eval.mean_apfd_difference {
        println!("{strategy}: mean |APFD difference| {d:.4}");
    }
    println!(
        "predicted {} pairs in {:.3}s; total {:.2}s -> {}",
        result.manifest.pairs["test"],
        result.manifest.timings.predict_s,
        result.manifest.timings.total_s,
        out.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig {
        mutants: a.mutants,
        noise_rate: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    if let Some(k) = a.max_tests_per_mutant {
        cfg.max_tests_per_mutant = k;
    }
    if let Some(rule) = &a.rule {
        cfg.rule = serde_json::from_str::<LabelRule>(rule).map_err(|e| usage(format!("--rule: {e}")))?;
    }
    let corpus = generate_synthetic_corpus(&cfg).map_err(|e| usage(e.to_string()))?;
    corpus.write_dir(&a.out)?;
    let c = &corpus.corpus;
    let mut per_test: BTreeMap<u64, usize> = BTreeMap::new();
    for &(_, t) in c.coverage.keys() {
        *per_test.entry(t).or_default() += 1;
    }
    println!(
        "{} mutants, {} tests ({} covering), {} pairs, kill rate {:.3}, {} features -> {}",
        c.mutants.len(),
        c.tests.len(),
        per_test.len(),
        c.coverage.len(),
        kill_rate(&c.coverage, &c.kills),
        FEATURE_NAMES.len(),
        a.out.display()
    );
    Ok(())
}
