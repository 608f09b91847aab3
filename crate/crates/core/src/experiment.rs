//! End-to-end experiment driver: split, train, tune, predict, evaluate and
//! prioritize, with every artifact written into one run directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::synth::fnv1a;
use crate::corpus::{
    split_cross_project, split_cross_version, split_same_version, Corpus, CorpusIds, CoverageMap, DatasetSplit,
    KillMap, MutantKey, Outcome, SOURCE_DIR,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport, KillMatrix, FEWER_COVERED_RATIO};
use crate::extractor::{extract_rows, FeatureVector, PairRow, Project};
use crate::io::{read_json, read_to_string, write_csv, write_json};
use crate::models::{ImportanceReport, ModelConfig, TreeEnsemblePair};
use crate::prioritization::{
    apfd_difference, faults_from_kills, write_prioritization_csv, ApfdDifference, FaultMap, Strategy,
};
use crate::thresholds::{classify, optimize_threshold, ThresholdMode, ThresholdReport};

pub const SPLIT_FILE: &str = "split.json";
pub const MODEL_FILE: &str = "model.json";
pub const THRESHOLD_FILE: &str = "threshold_report.json";
pub const PREDICTED_FILE: &str = "predicted_matrix.csv";
pub const EVAL_JSON_FILE: &str = "eval_report.json";
pub const EVAL_CSV_FILE: &str = "eval_report.csv";
pub const IMPORTANCE_FILE: &str = "importance.json";
pub const PRIORITIZATION_FILE: &str = "prioritization.csv";
pub const ORDER_FILE: &str = "order.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentScenario {
    /// One corpus, 80/10/10.
    SameVersion,
    /// `[old, new]`.
    CrossVersion,
    /// `[source.., target]`.
    CrossProject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ExperimentScenario,
    pub corpora: Vec<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub threshold: ThresholdMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_ratio")]
    pub fewer_covered_ratio: f64,
    /// Also evaluate each model on its own.
    #[serde(default)]
    pub ablation: bool,
    /// JSON map of fault name to detecting test ids. Without it every
    /// actually killed test-split mutant is a fault.
    #[serde(default)]
    pub faults: Option<PathBuf>,
}

fn default_repeats() -> usize {
    10
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Total, Strategy::Additional]
}

fn default_ratio() -> f64 {
    FEWER_COVERED_RATIO
}

impl ExperimentConfig {
    pub fn new(scenario: ExperimentScenario, corpora: Vec<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            scenario,
            corpora,
            seed: 0,
            model: ModelConfig::default(),
            threshold: ThresholdMode::Tuned,
            output_dir: None,
            repeats: default_repeats(),
            strategies: default_strategies(),
            fewer_covered_ratio: default_ratio(),
            ablation: false,
            faults: None,
        }
    }

    /// Parses a config file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = read_to_string(path)?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.corpora.iter_mut().for_each(resolve);
        cfg.faults.iter_mut().for_each(resolve);
        cfg.output_dir.iter_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_corpus_count(self.scenario, self.corpora.len())?;
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fewer_covered_ratio) {
            return Err(Error::Config("fewer_covered_ratio must lie in [0, 1]".into()));
        }
        if let ThresholdMode::Fixed { theta } = self.threshold {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::Config(format!("fixed threshold {theta} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the config with the output directory blanked, so the same
    /// experiment written to two places hashes the same.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        Ok(hex(&Sha256::digest(serde_json::to_vec(&c)?)))
    }
}

/// Rejects corpus lists that do not fit the scenario.
pub fn check_corpus_count(scenario: ExperimentScenario, n: usize) -> Result<()> {
    let (ok, need) = match scenario {
        ExperimentScenario::SameVersion => (n == 1, "exactly one corpus"),
        ExperimentScenario::CrossVersion => (n == 2, "exactly two corpora (old, new)"),
        ExperimentScenario::CrossProject => (n >= 2, "at least one source corpus and a target"),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{scenario:?} needs {need}, got {n}")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stage-specific seed derived from the experiment seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, stage: &str) -> u64 {
    let mut z = base ^ fnv1a(stage.as_bytes());
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A corpus directory with its extracted feature rows.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub tag: String,
    pub corpus: Corpus,
    pub rows: Vec<PairRow>,
}

impl LoadedCorpus {
    pub fn ids(&self) -> CorpusIds {
        CorpusIds {
            tag: self.tag.clone(),
            ids: self.corpus.covered_mutants(),
        }
    }
}

/// Loads the CSVs and sources of `dir` and extracts every covered pair.
pub fn load_corpus(dir: &Path, tag: &str) -> Result<LoadedCorpus> {
    let corpus = Corpus::load_dir(dir).map_err(|e| e.context(format!("loading corpus {}", dir.display())))?;
    let project = Project::load_dir(&dir.join(SOURCE_DIR))?;
    let rows = extract_rows(&project, &corpus).map_err(|e| e.context(format!("extracting {}", dir.display())))?;
    Ok(LoadedCorpus {
        tag: tag.to_string(),
        corpus,
        rows,
    })
}

/// Corpus tags: directory names, made unique by position when they clash.
pub fn corpus_tags(paths: &[PathBuf]) -> Vec<String> {
    let names: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".into())
        })
        .collect();
    let unique = names.iter().collect::<BTreeSet<_>>().len() == names.len();
    if unique {
        names
    } else {
        names.iter().enumerate().map(|(i, n)| format!("{i}-{n}")).collect()
    }
}

/// Splits by scenario; `ids` are ordered as in the config's `corpora`.
pub fn make_split(scenario: ExperimentScenario, ids: &[CorpusIds], seed: u64) -> Result<DatasetSplit> {
    check_corpus_count(scenario, ids.len())?;
    match scenario {
        ExperimentScenario::SameVersion => split_same_version(&ids[0].tag, &ids[0].ids, seed),
        ExperimentScenario::CrossVersion => split_cross_version(&ids[0], &ids[1], seed),
        ExperimentScenario::CrossProject => {
            let (target, sources) = ids.split_last().expect("validated corpus count");
            split_cross_project(sources, target, seed)
        }
    }
}

/// Rows of `corpora` whose mutant key is in `keys`, in corpus then row order.
pub fn select_rows(corpora: &[LoadedCorpus], keys: &[MutantKey]) -> Vec<PairRow> {
    let wanted: BTreeSet<(&str, u64)> = keys.iter().map(|k| (k.corpus.as_str(), k.id)).collect();
    corpora
        .iter()
        .flat_map(|c| {
            c.rows
                .iter()
                .filter(|r| wanted.contains(&(c.tag.as_str(), r.mutant_id)))
        })
        .cloned()
        .collect()
}

fn features(rows: &[PairRow]) -> Vec<FeatureVector> {
    rows.iter().map(|r| r.features.clone()).collect()
}

fn labels(rows: &[PairRow]) -> Vec<bool> {
    rows.iter().map(PairRow::killed).collect()
}

/// Killed pairs of `rows` with their reasons.
pub fn outcomes(rows: &[PairRow]) -> KillMap {
    rows.iter()
        .filter(|r| r.outcome != Outcome::LIVE)
        .map(|r| ((r.mutant_id, r.test_id), r.outcome))
        .collect()
}

pub fn write_predicted_matrix(path: &Path, rows: &[PairRow], scores: &[f64], theta: f64) -> Result<()> {
    if rows.len() != scores.len() {
        return Err(Error::LengthMismatch(rows.len(), scores.len()));
    }
    let mut sorted: Vec<(u64, u64, f64)> = rows
        .iter()
        .zip(scores)
        .map(|(r, &s)| (r.mutant_id, r.test_id, s))
        .collect();
    sorted.sort_by_key(|&(m, t, _)| (m, t));
    write_csv(path, &["mutant_id", "test_id", "score", "killed"], |w| {
        for (m, t, s) in sorted {
            w.write_record([
                m.to_string(),
                t.to_string(),
                s.to_string(),
                u8::from(s >= theta).to_string(),
            ])?;
        }
        Ok(())
    })
}

/// An artifact tagged with the seed and config hash that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub seed: u64,
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Stamped<T> {
    pub fn new(seed: u64, config_hash: &str, body: T) -> Stamped<T> {
        Stamped {
            seed,
            config_hash: config_hash.to_string(),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub runs: Vec<ApfdDifference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub threshold: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub forest: ModelEval,
    pub booster: ModelEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEval {
    pub scenario: ExperimentScenario,
    pub threshold_mode: ThresholdMode,
    pub threshold: f64,
    #[serde(flatten)]
    pub report: EvalReport,
    pub ablation: Option<Ablation>,
    pub mean_apfd_difference: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_extract_s: f64,
    pub train_s: f64,
    pub tune_s: f64,
    pub predict_s: f64,
    pub evaluate_s: f64,
    pub prioritize_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: ExperimentConfig,
    pub pairs: BTreeMap<String, usize>,
    pub threshold: f64,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub eval: ExperimentEval,
    pub importance: ImportanceReport,
    pub manifest: Manifest,
}

fn pick_threshold(
    mode: ThresholdMode,
    val_scores: &[f64],
    val_labels: &[bool],
) -> Result<(f64, Option<ThresholdReport>)> {
    match mode {
        ThresholdMode::Fixed { theta } => Ok((theta, None)),
        ThresholdMode::Tuned => {
            let report =
                optimize_threshold(val_scores, val_labels).map_err(|e| e.context("tuning on the validation split"))?;
            Ok((report.selected, Some(report)))
        }
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs one experiment and writes every artifact into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let config_hash = cfg.hash()?;
    let seeds: BTreeMap<String, u64> = ["split", "model", "prioritization"]
        .into_iter()
        .map(|s| (s.to_string(), derive_seed(cfg.seed, s)))
        .collect();
    let mut artifacts = Vec::new();
    let mut notes = Vec::new();

    let t = Instant::now();
    let tags = corpus_tags(&cfg.corpora);
    let corpora = cfg
        .corpora
        .iter()
        .zip(&tags)
        .map(|(p, tag)| load_corpus(p, tag))
        .collect::<Result<Vec<_>>>()?;
    let load_extract_s = secs(t);

    let ids: Vec<CorpusIds> = corpora.iter().map(LoadedCorpus::ids).collect();
    let split = make_split(cfg.scenario, &ids, seeds["split"])?;
    write_json(
        &out.join(SPLIT_FILE),
        &Stamped::new(cfg.seed, &config_hash, split.clone()),
    )?;
    artifacts.push(SPLIT_FILE.to_string());
    let train = select_rows(&corpora, &split.train);
    let val = select_rows(&corpora, &split.val);
    let test = select_rows(&corpora, &split.test);
    if test.is_empty() {
        return Err(Error::InvalidParameter("the test split has no covered pairs".into()));
    }
    let test_corpus = corpora
        .iter()
        .find(|c| c.tag == split.test[0].corpus)
        .expect("test keys come from a loaded corpus");

    let t = Instant::now();
    let model = TreeEnsemblePair::train(&features(&train), &labels(&train), &cfg.model, seeds["model"])
        .map_err(|e| e.context("training on the train split"))?;
    model.save(&out.join(MODEL_FILE))?;
    artifacts.push(MODEL_FILE.to_string());
    let importance = model.importance();
    write_json(
        &out.join(IMPORTANCE_FILE),
        &Stamped::new(cfg.seed, &config_hash, importance.clone()),
    )?;
    artifacts.push(IMPORTANCE_FILE.to_string());
    let train_s = secs(t);

    let t = Instant::now();
    let val_labels = labels(&val);
    let val_parts = match (cfg.threshold, cfg.ablation) {
        (ThresholdMode::Fixed { .. }, false) => Vec::new(),
        _ => model.predict_parts(&features(&val)),
    };
    let val_combined: Vec<f64> = val_parts.iter().map(|p| p.combined).collect();
    let (theta, report) = pick_threshold(cfg.threshold, &val_combined, &val_labels)?;
    if let Some(report) = report {
        write_json(&out.join(THRESHOLD_FILE), &Stamped::new(cfg.seed, &config_hash, report))?;
        artifacts.push(THRESHOLD_FILE.to_string());
    }
    let tune_s = secs(t);

    let t = Instant::now();
    let test_parts = model.predict_parts(&features(&test));
    let predict_s = secs(t);
    let scores: Vec<f64> = test_parts.iter().map(|p| p.combined).collect();
    write_predicted_matrix(&out.join(PREDICTED_FILE), &test, &scores, theta)?;
    artifacts.push(PREDICTED_FILE.to_string());

    let t = Instant::now();
    let actual = KillMatrix::from_rows(&test);
    let reasons = outcomes(&test);
    let coverage: &CoverageMap = &test_corpus.corpus.coverage;
    let eval_scores = |scores: &[f64], theta: f64| -> Result<(KillMatrix, EvalReport)> {
        let predicted = KillMatrix::from_predictions(&test, &classify(scores, theta))?;
        let report = evaluate(&predicted, &actual, &reasons, coverage, cfg.fewer_covered_ratio)?;
        Ok((predicted, report))
    };
    let (predicted, report) = eval_scores(&scores, theta)?;
    let ablation = if cfg.ablation {
        let one = |pick: fn(&crate::models::Prediction) -> f64| -> Result<ModelEval> {
            let val_scores: Vec<f64> = val_parts.iter().map(pick).collect();
            let (threshold, _) = pick_threshold(cfg.threshold, &val_scores, &val_labels)?;
            let test_scores: Vec<f64> = test_parts.iter().map(pick).collect();
            let (_, report) = eval_scores(&test_scores, threshold)?;
            Ok(ModelEval { threshold, report })
        };
        Some(Ablation {
            forest: one(|p| p.forest)?,
            booster: one(|p| p.booster)?,
        })
    } else {
        None
    };
    let evaluate_s = secs(t);

    let t = Instant::now();
    let faults: FaultMap = match &cfg.faults {
        Some(p) => read_json(p).map_err(|e| e.context(format!("reading faults {}", p.display())))?,
        None => faults_from_kills(&actual),
    };
    let mut differences = Vec::new();
    if faults.is_empty() {
        notes.push("prioritization skipped: no faults (no actually killed mutants in the test split)".into());
    } else {
        for &strategy in &cfg.strategies {
            differences.push(apfd_difference(
                &predicted,
                &actual,
                &faults,
                strategy,
                cfg.repeats,
                seeds["prioritization"],
            )?);
        }
    }
    write_prioritization_csv(&out.join(PRIORITIZATION_FILE), &differences)?;
    write_json(
        &out.join(ORDER_FILE),
        &Stamped::new(
            cfg.seed,
            &config_hash,
            Orders {
                runs: differences.clone(),
            },
        ),
    )?;
    artifacts.extend([PRIORITIZATION_FILE.to_string(), ORDER_FILE.to_string()]);
    let prioritize_s = secs(t);

    let eval = ExperimentEval {
        scenario: cfg.scenario,
        threshold_mode: cfg.threshold,
        threshold: theta,
        report,
        ablation,
        mean_apfd_difference: differences
            .iter()
            .map(|d| (d.strategy.as_str().to_string(), d.mean_abs_diff))
            .collect(),
    };
    write_json(
        &out.join(EVAL_JSON_FILE),
        &Stamped::new(cfg.seed, &config_hash, eval.clone()),
    )?;
    eval.report.write_csv(&out.join(EVAL_CSV_FILE), &config_hash[..12])?;
    artifacts.extend([EVAL_JSON_FILE.to_string(), EVAL_CSV_FILE.to_string()]);

    let manifest = Manifest {
        tool: "killmatrix".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config_hash,
        seeds,
        config: cfg.clone(),
        pairs: [("train", train.len()), ("val", val.len()), ("test", test.len())]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        threshold: theta,
        artifacts,
        notes,
        timings: Timings {
            load_extract_s,
            train_s,
            tune_s,
            predict_s,
            evaluate_s,
            prioritize_s,
            total_s: secs(start),
        },
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(ExperimentOutcome {
        eval,
        importance,
        manifest,
    })
}
