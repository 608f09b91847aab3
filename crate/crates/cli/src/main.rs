mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Predicts fine-grained kill matrices from mutation-tool outputs and uses
/// them for mutation scores and test prioritization.
#[derive(Debug, Parser)]
#[command(name = "killmatrix", version, about)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate mutation-tool outputs and write a corpus directory.
    Ingest(IngestArgs),
    /// Extract the feature vector of every covered mutant-test pair.
    Extract(ExtractArgs),
    /// Split feature files into train/val/test by mutant.
    Split(SplitArgs),
    /// Train the forest/booster pair.
    Train(TrainArgs),
    /// Select the classification threshold on a validation set.
    Tune(TuneArgs),
    /// Predict a kill matrix.
    Predict(PredictArgs),
    /// Score a predicted kill matrix against ground truth.
    Evaluate(EvaluateArgs),
    /// Report normalized feature importances of one or more models.
    Importance(ImportanceArgs),
    /// Prioritize tests by predicted kills and score the orders with APFD.
    Prioritize(PrioritizeArgs),
    /// Run a full experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Generate a synthetic corpus with a known labelling rule.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MutantFormat {
    Canonical,
    Major,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Mutant list (`mutants.csv` or Major's `mutants.log`).
    #[arg(long)]
    pub mutants: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: MutantFormat,
    #[arg(long)]
    pub coverage: PathBuf,
    /// Kill map; covered pairs missing from it survived.
    #[arg(long)]
    pub kills: Option<PathBuf>,
    #[arg(long)]
    pub tests: PathBuf,
    /// Java source root, copied into the corpus.
    #[arg(long)]
    pub src: PathBuf,
    /// Corpus directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus directory; supplies any of the inputs below not given.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub src: Option<PathBuf>,
    #[arg(long)]
    pub mutants: Option<PathBuf>,
    #[arg(long)]
    pub coverage: Option<PathBuf>,
    /// Defaults to `tests.csv` next to the mutants file.
    #[arg(long)]
    pub tests: Option<PathBuf>,
    /// Defaults to `killmap.csv` next to the mutants file, when present.
    #[arg(long)]
    pub kills: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    SameVersion,
    CrossVersion,
    CrossProject,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Feature files, one per corpus: `[corpus]`, `[old, new]` or `[source.., target]`.
    #[arg(long = "features", required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "same-version")]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives split.json, train.csv, val.csv and test.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Model config JSON (forest, booster, max_bins).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Fixed threshold; defaults to 0.35 unless a report is given.
    #[arg(long, conflicts_with = "threshold_report")]
    pub threshold: Option<f64>,
    /// Use the threshold selected by `tune`.
    #[arg(long)]
    pub threshold_report: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted matrix (`mutant_id,test_id,...,killed`).
    #[arg(long)]
    pub predicted: PathBuf,
    /// Labelled feature file of the same pairs.
    #[arg(long)]
    pub actual: PathBuf,
    /// Corpus coverage for the fewer-covered denominator; defaults to the
    /// pairs of `--actual`.
    #[arg(long)]
    pub coverage: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    pub fewer_covered_ratio: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a one-row CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// One or more models; several are averaged.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the top N features per model.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Total,
    Additional,
    Both,
}

#[derive(Debug, Args)]
pub struct PrioritizeArgs {
    #[arg(long)]
    pub predicted: PathBuf,
    /// Ground-truth features; enables APFD differences.
    #[arg(long)]
    pub actual: Option<PathBuf>,
    /// JSON map of fault name to detecting test ids.
    #[arg(long)]
    pub faults: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `tuned` or a fixed value such as `0.35`.
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub ablation: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub mutants: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_tests_per_mutant: Option<usize>,
    /// Labelling rule as JSON; defaults to diff hash, non-STD operator and hits >= 1.
    #[arg(long)]
    pub rule: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let usage = err.downcast_ref::<commands::UsageError>().is_some();
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
