//! Scoring predicted kill matrices at pair, mutant and reason level.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CoverageMap, KillMap, Outcome};
use crate::error::{Error, Result};
use crate::extractor::PairRow;
use crate::io::{csv_reader, malformed, write_csv};
use crate::thresholds::Confusion;

/// Killed flags over a covered-pair universe.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KillMatrix {
    pub entries: BTreeMap<(u64, u64), bool>,
}

impl KillMatrix {
    pub fn new(entries: BTreeMap<(u64, u64), bool>) -> KillMatrix {
        KillMatrix { entries }
    }

    /// Ground truth from labelled feature rows.
    pub fn from_rows(rows: &[PairRow]) -> KillMatrix {
        KillMatrix::new(rows.iter().map(|r| ((r.mutant_id, r.test_id), r.killed())).collect())
    }

    /// Predictions aligned with `rows`.
    pub fn from_predictions(rows: &[PairRow], predicted: &[bool]) -> Result<KillMatrix> {
        if rows.len() != predicted.len() {
            return Err(Error::LengthMismatch(rows.len(), predicted.len()));
        }
        Ok(KillMatrix::new(
            rows.iter()
                .zip(predicted)
                .map(|(r, &k)| ((r.mutant_id, r.test_id), k))
                .collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn same_universe(&self, other: &KillMatrix) -> bool {
        self.entries.len() == other.entries.len() && self.entries.keys().eq(other.entries.keys())
    }

    pub fn tests(&self) -> BTreeSet<u64> {
        self.entries.keys().map(|&(_, t)| t).collect()
    }

    /// Mutants killed by each test; tests that kill nothing map to an empty set.
    pub fn kills_by_test(&self) -> BTreeMap<u64, BTreeSet<u64>> {
        let mut out: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        for (&(m, t), &k) in &self.entries {
            let set = out.entry(t).or_default();
            if k {
                set.insert(m);
            }
        }
        out
    }

    /// Reads `mutant_id,test_id,killed[,...]`; extra columns are ignored.
    pub fn read_csv(path: &Path) -> Result<KillMatrix> {
        let mut rdr = csv_reader(path)?;
        let header = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            header.iter().position(|h| h == name).ok_or_else(|| Error::Malformed {
                path: path.to_path_buf(),
                line: 1,
                raw: header.iter().collect::<Vec<_>>().join(","),
                reason: format!("missing column `{name}`"),
            })
        };
        let (cm, ct, ck) = (col("mutant_id")?, col("test_id")?, col("killed")?);
        let mut entries = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
            let id = |i: usize| {
                field(i)
                    .parse::<u64>()
                    .map_err(|_| malformed(path, &rec, "id is not an integer"))
            };
            let (m, t) = (id(cm)?, id(ct)?);
            let killed = match field(ck) {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(malformed(path, &rec, format!("killed must be 0 or 1, got `{other}`"))),
            };
            if entries.insert((m, t), killed).is_some() {
                return Err(Error::DuplicateEntry {
                    mutant_id: m,
                    test_id: t,
                });
            }
        }
        Ok(KillMatrix { entries })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &["mutant_id", "test_id", "killed"], |w| {
            for (&(m, t), &k) in &self.entries {
                w.write_record([m.to_string(), t.to_string(), u8::from(k).to_string()])?;
            }
            Ok(())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Confusion> for Prf {
    fn from(c: Confusion) -> Prf {
        Prf {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
        }
    }
}

fn check_universe(predicted: &KillMatrix, actual: &KillMatrix) -> Result<()> {
    if predicted.same_universe(actual) {
        Ok(())
    } else {
        Err(Error::UniverseMismatch)
    }
}

/// Killed pairs are the positive class.
pub fn eval_pairs(predicted: &KillMatrix, actual: &KillMatrix) -> Result<Prf> {
    check_universe(predicted, actual)?;
    let mut c = Confusion::default();
    for (p, a) in predicted.entries.values().zip(actual.entries.values()) {
        c.add(*p, *a);
    }
    Ok(c.into())
}

/// A mutant is killed when any covering test kills it.
pub fn aggregate_mutants(matrix: &KillMatrix) -> BTreeMap<u64, bool> {
    let mut out = BTreeMap::new();
    for (&(m, _), &k) in &matrix.entries {
        *out.entry(m).or_insert(false) |= k;
    }
    out
}

fn survived_confusion<'a>(pairs: impl Iterator<Item = (&'a bool, &'a bool)>) -> Confusion {
    let mut c = Confusion::default();
    for (p, a) in pairs {
        c.add(!p, !a);
    }
    c
}

/// Survived mutants are the positive class.
pub fn eval_mutants(predicted: &KillMatrix, actual: &KillMatrix) -> Result<Prf> {
    check_universe(predicted, actual)?;
    let (p, a) = (aggregate_mutants(predicted), aggregate_mutants(actual));
    Ok(survived_confusion(p.values().zip(a.values())).into())
}

/// Percentage of covered mutants that are killed.
pub fn mutation_score(matrix: &KillMatrix) -> Result<f64> {
    let agg = aggregate_mutants(matrix);
    if agg.is_empty() {
        return Err(Error::InvalidParameter(
            "mutation score needs at least one covered mutant".into(),
        ));
    }
    let killed = agg.values().filter(|&&k| k).count();
    Ok(100.0 * killed as f64 / agg.len() as f64)
}

pub fn ape(pms: f64, ams: f64) -> f64 {
    (pms - ams).abs()
}

/// Recall among actually killed pairs, per killing reason.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReasonRecall {
    #[serde(rename = "FAIL")]
    pub fail: Option<f64>,
    #[serde(rename = "TIME")]
    pub time: Option<f64>,
    #[serde(rename = "EXC")]
    pub exc: Option<f64>,
}

pub fn eval_by_reason(predicted: &KillMatrix, outcomes: &KillMap) -> Result<ReasonRecall> {
    let mut hit = [0u64; 3];
    let mut total = [0u64; 3];
    for (key, outcome) in outcomes {
        let slot = match outcome {
            Outcome::FAIL => 0,
            Outcome::TIME => 1,
            Outcome::EXC => 2,
            Outcome::LIVE => continue,
        };
        let p = predicted.entries.get(key).ok_or(Error::UniverseMismatch)?;
        total[slot] += 1;
        hit[slot] += u64::from(*p);
    }
    let recall = |i: usize| (total[i] > 0).then(|| hit[i] as f64 / total[i] as f64);
    Ok(ReasonRecall {
        fail: recall(0),
        time: recall(1),
        exc: recall(2),
    })
}

/// Default share of covering tests under which a mutant counts as fewer-covered.
pub const FEWER_COVERED_RATIO: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FewerCovered {
    pub covering_tests: usize,
    pub max_tests: f64,
    pub mutants: usize,
    pub f1: Option<f64>,
}

/// Mutant-level F1 (survived positive) over the evaluated mutants covered by
/// at most `ratio` of the distinct tests in `coverage`.
pub fn fewer_covered_f1(
    predicted: &KillMatrix,
    actual: &KillMatrix,
    coverage: &CoverageMap,
    ratio: f64,
) -> Result<FewerCovered> {
    check_universe(predicted, actual)?;
    if coverage.is_empty() {
        return Err(Error::InvalidParameter(
            "fewer-covered evaluation needs coverage".into(),
        ));
    }
    let covering_tests = coverage.keys().map(|&(_, t)| t).collect::<BTreeSet<_>>().len();
    let max_tests = ratio * covering_tests as f64;
    let mut per_mutant: BTreeMap<u64, usize> = BTreeMap::new();
    for &(m, _) in coverage.keys() {
        *per_mutant.entry(m).or_default() += 1;
    }
    let (p, a) = (aggregate_mutants(predicted), aggregate_mutants(actual));
    let selected: BTreeSet<u64> = a
        .keys()
        .filter(|m| per_mutant.get(m).is_some_and(|&n| n as f64 <= max_tests))
        .copied()
        .collect();
    let c = survived_confusion(selected.iter().map(|m| (&p[m], &a[m])));
    Ok(FewerCovered {
        covering_tests,
        max_tests,
        mutants: selected.len(),
        f1: (!selected.is_empty()).then(|| c.f1()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pairs: usize,
    pub mutants: usize,
    pub pair_level: Prf,
    pub mutant_level: Prf,
    pub predicted_mutation_score: f64,
    pub actual_mutation_score: f64,
    pub ape: f64,
    pub reason_recall: ReasonRecall,
    pub fewer_covered: FewerCovered,
}

pub fn evaluate(
    predicted: &KillMatrix,
    actual: &KillMatrix,
    outcomes: &KillMap,
    coverage: &CoverageMap,
    ratio: f64,
) -> Result<EvalReport> {
    let pms = mutation_score(predicted)?;
    let ams = mutation_score(actual)?;
    Ok(EvalReport {
        pairs: actual.len(),
        mutants: aggregate_mutants(actual).len(),
        pair_level: eval_pairs(predicted, actual)?,
        mutant_level: eval_mutants(predicted, actual)?,
        predicted_mutation_score: pms,
        actual_mutation_score: ams,
        ape: ape(pms, ams),
        reason_recall: eval_by_reason(predicted, outcomes)?,
        fewer_covered: fewer_covered_f1(predicted, actual, coverage, ratio)?,
    })
}

pub const EVAL_CSV_HEADER: [&str; 16] = [
    "experiment",
    "pairs",
    "mutants",
    "pair_precision",
    "pair_recall",
    "pair_f1",
    "mutant_precision",
    "mutant_recall",
    "mutant_f1",
    "pms",
    "ams",
    "ape",
    "recall_fail",
    "recall_time",
    "recall_exc",
    "fewer_covered_f1",
];

impl EvalReport {
    /// One flat row; absent values are empty cells.
    pub fn csv_row(&self, experiment: &str) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            experiment.to_string(),
            self.pairs.to_string(),
            self.mutants.to_string(),
            self.pair_level.precision.to_string(),
            self.pair_level.recall.to_string(),
            self.pair_level.f1.to_string(),
            self.mutant_level.precision.to_string(),
            self.mutant_level.recall.to_string(),
            self.mutant_level.f1.to_string(),
            self.predicted_mutation_score.to_string(),
            self.actual_mutation_score.to_string(),
            self.ape.to_string(),
            opt(self.reason_recall.fail),
            opt(self.reason_recall.time),
            opt(self.reason_recall.exc),
            opt(self.fewer_covered.f1),
        ]
    }

    pub fn write_csv(&self, path: &Path, experiment: &str) -> Result<()> {
        write_csv(path, &EVAL_CSV_HEADER, |w| {
            w.write_record(self.csv_row(experiment))?;
            Ok(())
        })
    }
}
