//! Mutation-tool outputs, covered mutant-test pairs and dataset splits.

mod ingest;
mod split;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{
    ingest_coverage, ingest_kill_map, ingest_mutant_log, ingest_tests, parse_major_line, write_coverage,
    write_kill_map, write_mutants, write_tests, LogFormat,
};
pub use split::{
    split_cross_project, split_cross_version, split_same_version, CorpusIds, DatasetSplit, MutantKey, Scenario,
};

pub const MUTANTS_FILE: &str = "mutants.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const KILLMAP_FILE: &str = "killmap.csv";
pub const TESTS_FILE: &str = "tests.csv";
/// Java sources of a corpus directory live under this subdirectory.
pub const SOURCE_DIR: &str = "src";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    AOR,
    LOR,
    COR,
    ROR,
    SOR,
    ORU,
    EVR,
    LVR,
    STD,
}

impl Operator {
    pub const ALL: [Operator; 9] = [
        Operator::AOR,
        Operator::LOR,
        Operator::COR,
        Operator::ROR,
        Operator::SOR,
        Operator::ORU,
        Operator::EVR,
        Operator::LVR,
        Operator::STD,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::AOR => "AOR",
            Operator::LOR => "LOR",
            Operator::COR => "COR",
            Operator::ROR => "ROR",
            Operator::SOR => "SOR",
            Operator::ORU => "ORU",
            Operator::EVR => "EVR",
            Operator::LVR => "LVR",
            Operator::STD => "STD",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Operator::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| Error::UnknownOperator(s.to_string()))
    }
}

/// Outcome of running one test against one mutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    FAIL,
    TIME,
    EXC,
    LIVE,
}

impl Outcome {
    pub fn is_killed(self) -> bool {
        self != Outcome::LIVE
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::FAIL => "FAIL",
            Outcome::TIME => "TIME",
            Outcome::EXC => "EXC",
            Outcome::LIVE => "LIVE",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FAIL" => Ok(Outcome::FAIL),
            "TIME" => Ok(Outcome::TIME),
            "EXC" => Ok(Outcome::EXC),
            "LIVE" => Ok(Outcome::LIVE),
            other => Err(Error::UnknownOutcome(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantRecord {
    pub mutant_id: u64,
    pub operator: Operator,
    pub class_name: String,
    pub method_signature: Option<String>,
    pub line: u32,
    pub before: String,
    pub after: String,
    pub inside_method: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCaseRecord {
    pub test_id: u64,
    /// `pkg.Class#method`
    pub qualified_name: String,
    pub source_text: String,
}

impl TestCaseRecord {
    pub fn method_name(&self) -> &str {
        self.qualified_name.rsplit('#').next().unwrap_or(&self.qualified_name)
    }
}

/// (mutant, test) → hit count for every covered pair.
pub type CoverageMap = BTreeMap<(u64, u64), u32>;

/// (mutant, test) → outcome; pairs absent from the map are `LIVE`.
pub type KillMap = BTreeMap<(u64, u64), Outcome>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub mutant_id: u64,
    pub test_id: u64,
    pub hits: u32,
    pub outcome: Outcome,
}

/// One entry per covered pair; uncovered mutants never appear.
pub fn build_pairs(
    mutants: &[MutantRecord],
    tests: &[TestCaseRecord],
    coverage: &CoverageMap,
    kills: &KillMap,
) -> Result<Vec<Pair>> {
    let mutant_ids: BTreeSet<u64> = mutants.iter().map(|m| m.mutant_id).collect();
    if mutant_ids.len() != mutants.len() {
        return Err(Error::Inconsistent("duplicate mutant id".into()));
    }
    let test_ids: BTreeSet<u64> = tests.iter().map(|t| t.test_id).collect();
    if test_ids.len() != tests.len() {
        return Err(Error::Inconsistent("duplicate test id".into()));
    }
    for &(m, t) in kills.keys() {
        if !coverage.contains_key(&(m, t)) {
            return Err(Error::Inconsistent(format!(
                "kill-map entry for uncovered pair (mutant {m}, test {t})"
            )));
        }
    }
    coverage
        .iter()
        .map(|(&(m, t), &hits)| {
            if !mutant_ids.contains(&m) {
                return Err(Error::Inconsistent(format!("coverage references unknown mutant {m}")));
            }
            if !test_ids.contains(&t) {
                return Err(Error::Inconsistent(format!("coverage references unknown test {t}")));
            }
            Ok(Pair {
                mutant_id: m,
                test_id: t,
                hits,
                outcome: kills.get(&(m, t)).copied().unwrap_or(Outcome::LIVE),
            })
        })
        .collect()
}

/// Everything read from one corpus directory.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub mutants: Vec<MutantRecord>,
    pub tests: Vec<TestCaseRecord>,
    pub coverage: CoverageMap,
    pub kills: KillMap,
}

impl Corpus {
    pub fn pairs(&self) -> Result<Vec<Pair>> {
        build_pairs(&self.mutants, &self.tests, &self.coverage, &self.kills)
    }

    /// Reads `mutants.csv`, `coverage.csv`, `killmap.csv` and `tests.csv`
    /// from `dir`. A missing kill map means every pair survived.
    pub fn load_dir(dir: &Path) -> Result<Corpus> {
        let kill_path = dir.join(KILLMAP_FILE);
        let corpus = Corpus {
            mutants: ingest_mutant_log(&dir.join(MUTANTS_FILE), LogFormat::Canonical)?,
            tests: ingest_tests(&dir.join(TESTS_FILE))?,
            coverage: ingest_coverage(&dir.join(COVERAGE_FILE))?,
            kills: if kill_path.exists() {
                ingest_kill_map(&kill_path)?
            } else {
                KillMap::new()
            },
        };
        corpus.pairs()?;
        Ok(corpus)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        write_mutants(&dir.join(MUTANTS_FILE), &self.mutants)?;
        write_tests(&dir.join(TESTS_FILE), &self.tests)?;
        write_coverage(&dir.join(COVERAGE_FILE), &self.coverage)?;
        write_kill_map(&dir.join(KILLMAP_FILE), &self.kills)
    }

    /// Ids of mutants with at least one covering test, ascending.
    pub fn covered_mutants(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.coverage.keys().map(|&(m, _)| m).collect();
        set.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mutant(id: u64) -> MutantRecord {
        MutantRecord {
            mutant_id: id,
            operator: Operator::ROR,
            class_name: "p.C".into(),
            method_signature: Some("m()".into()),
            line: 1,
            before: "a < b".into(),
            after: "a > b".into(),
            inside_method: true,
        }
    }

    fn test(id: u64) -> TestCaseRecord {
        TestCaseRecord {
            test_id: id,
            qualified_name: format!("p.T#t{id}"),
            source_text: String::new(),
        }
    }

    #[test]
    fn uncovered_mutants_are_dropped_and_missing_kills_are_live() {
        let mutants = vec![mutant(1), mutant(2), mutant(3)];
        let tests = vec![test(1), test(2)];
        let coverage: CoverageMap = [((1, 1), 2), ((1, 2), 1), ((2, 1), 5), ((2, 2), 1)].into();
        let kills: KillMap = [((1, 1), Outcome::FAIL)].into();
        let pairs = build_pairs(&mutants, &tests, &coverage, &kills).unwrap();
        assert_eq!(pairs.len(), 4);
        assert!(pairs.iter().all(|p| p.mutant_id != 3));
        assert_eq!(pairs[0].outcome, Outcome::FAIL);
        assert_eq!(pairs[1].outcome, Outcome::LIVE);
    }

    #[test]
    fn kill_for_uncovered_pair_is_inconsistent() {
        let coverage: CoverageMap = [((1, 1), 1)].into();
        let kills: KillMap = [((1, 2), Outcome::FAIL)].into();
        let err = build_pairs(&[mutant(1)], &[test(1), test(2)], &coverage, &kills).unwrap_err();
        assert!(matches!(err, Error::Inconsistent(_)));
    }

    #[test]
    fn operator_round_trip() {
        for op in Operator::ALL {
            assert_eq!(op.as_str().parse::<Operator>().unwrap(), op);
        }
        assert!(matches!("XYZ".parse::<Operator>(), Err(Error::UnknownOperator(t)) if t == "XYZ"));
    }
}
