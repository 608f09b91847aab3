//! The 21-feature vector and its `features.csv` representation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Operator, Outcome};
use crate::error::{Error, Result};
use crate::io::{check_header, csv_reader, malformed, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

pub const NUM_FEATURES: usize = 21;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "statement_type",
    "parent_context_type",
    "lines_in_method",
    "source_complexity",
    "call",
    "callby",
    "conditional_block_loc",
    "conditional_block_count",
    "nesting_level",
    "occurring_count",
    "has_return_or_throw",
    "declared_variable_type",
    "variable_is_final_new",
    "mutation_operator",
    "statement_diff",
    "skeleton_modification",
    "hits_number",
    "assertion_number",
    "has_throw",
    "lines_in_test_case",
    "test_complexity",
];

pub const FEATURE_KINDS: [FeatureKind; NUM_FEATURES] = {
    use FeatureKind::{Categorical as C, Numeric as N};
    [C, C, N, N, N, N, N, N, N, N, N, C, N, C, C, C, N, N, C, N, N]
};

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub statement_type: String,
    pub parent_context_type: String,
    pub lines_in_method: u32,
    pub source_complexity: u32,
    pub call: u32,
    pub callby: u32,
    pub conditional_block_loc: u32,
    pub conditional_block_count: u32,
    pub nesting_level: u32,
    pub occurring_count: u32,
    pub has_return_or_throw: bool,
    /// Empty when the mutated statement declares nothing.
    pub declared_variable_type: String,
    pub variable_is_final_new: bool,
    pub mutation_operator: Operator,
    /// JSON encoding of the statement diff.
    pub statement_diff: String,
    /// JSON encoding of the skeleton pair; `[]` when empty.
    pub skeleton_modification: String,
    pub hits_number: u32,
    pub assertion_number: u32,
    /// `"throws"` or `""`.
    pub has_throw: String,
    pub lines_in_test_case: u32,
    pub test_complexity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue<'a> {
    Num(f64),
    Cat(&'a str),
}

impl FeatureVector {
    pub fn get(&self, i: usize) -> FeatureValue<'_> {
        use FeatureValue::{Cat, Num};
        let b = |v: bool| Num(f64::from(u8::from(v)));
        match i {
            0 => Cat(&self.statement_type),
            1 => Cat(&self.parent_context_type),
            2 => Num(self.lines_in_method.into()),
            3 => Num(self.source_complexity.into()),
            4 => Num(self.call.into()),
            5 => Num(self.callby.into()),
            6 => Num(self.conditional_block_loc.into()),
            7 => Num(self.conditional_block_count.into()),
            8 => Num(self.nesting_level.into()),
            9 => Num(self.occurring_count.into()),
            10 => b(self.has_return_or_throw),
            11 => Cat(&self.declared_variable_type),
            12 => b(self.variable_is_final_new),
            13 => Cat(self.mutation_operator.as_str()),
            14 => Cat(&self.statement_diff),
            15 => Cat(&self.skeleton_modification),
            16 => Num(self.hits_number.into()),
            17 => Num(self.assertion_number.into()),
            18 => Cat(&self.has_throw),
            19 => Num(self.lines_in_test_case.into()),
            20 => Num(self.test_complexity.into()),
            _ => panic!("feature index {i} out of range"),
        }
    }

    /// Cell text for `features.csv`; booleans as 0/1.
    pub fn cell(&self, i: usize) -> String {
        match self.get(i) {
            FeatureValue::Num(v) => format!("{v}"),
            FeatureValue::Cat(s) => s.to_string(),
        }
    }

    fn from_cells(cells: &[&str]) -> std::result::Result<Self, String> {
        let num = |i: usize| -> std::result::Result<u32, String> {
            cells[i]
                .trim()
                .parse::<u32>()
                .map_err(|_| format!("`{}` is not a non-negative integer", FEATURE_NAMES[i]))
        };
        let flag = |i: usize| -> std::result::Result<bool, String> {
            match cells[i].trim() {
                "0" | "false" => Ok(false),
                "1" | "true" => Ok(true),
                other => Err(format!("`{}` must be 0 or 1, got `{other}`", FEATURE_NAMES[i])),
            }
        };
        Ok(FeatureVector {
            statement_type: cells[0].to_string(),
            parent_context_type: cells[1].to_string(),
            lines_in_method: num(2)?,
            source_complexity: num(3)?,
            call: num(4)?,
            callby: num(5)?,
            conditional_block_loc: num(6)?,
            conditional_block_count: num(7)?,
            nesting_level: num(8)?,
            occurring_count: num(9)?,
            has_return_or_throw: flag(10)?,
            declared_variable_type: cells[11].to_string(),
            variable_is_final_new: flag(12)?,
            mutation_operator: cells[13].trim().parse().map_err(|e: Error| e.to_string())?,
            statement_diff: cells[14].to_string(),
            skeleton_modification: cells[15].to_string(),
            hits_number: num(16)?,
            assertion_number: num(17)?,
            has_throw: cells[18].to_string(),
            lines_in_test_case: num(19)?,
            test_complexity: num(20)?,
        })
    }
}

/// One labelled mutant-test pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRow {
    pub mutant_id: u64,
    pub test_id: u64,
    pub features: FeatureVector,
    pub outcome: Outcome,
}

impl PairRow {
    pub fn killed(&self) -> bool {
        self.outcome.is_killed()
    }
}

pub fn features_header() -> Vec<&'static str> {
    let mut h = vec!["mutant_id", "test_id"];
    h.extend(FEATURE_NAMES);
    h.extend(["outcome", "reason"]);
    h
}

pub fn write_features(path: &Path, rows: &[PairRow]) -> Result<()> {
    let header = features_header();
    write_csv(path, &header, |w| {
        for r in rows {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(r.mutant_id.to_string());
            rec.push(r.test_id.to_string());
            rec.extend((0..NUM_FEATURES).map(|i| r.features.cell(i)));
            rec.push(if r.killed() { "1" } else { "0" }.to_string());
            rec.push(r.outcome.to_string());
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn read_features(path: &Path) -> Result<Vec<PairRow>> {
    let header = features_header();
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(malformed(
                path,
                &rec,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let cells: Vec<&str> = rec.iter().collect();
        let id = |i: usize| {
            cells[i]
                .trim()
                .parse::<u64>()
                .map_err(|_| malformed(path, &rec, "id is not an integer"))
        };
        let mutant_id = id(0)?;
        let test_id = id(1)?;
        let features = FeatureVector::from_cells(&cells[2..2 + NUM_FEATURES]).map_err(|r| malformed(path, &rec, r))?;
        let outcome: Outcome = cells[2 + NUM_FEATURES + 1].trim().parse()?;
        let label = cells[2 + NUM_FEATURES].trim();
        if label != if outcome.is_killed() { "1" } else { "0" } {
            return Err(malformed(path, &rec, "outcome column disagrees with reason"));
        }
        out.push(PairRow {
            mutant_id,
            test_id,
            features,
            outcome,
        });
    }
    Ok(out)
}
