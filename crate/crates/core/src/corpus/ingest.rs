use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CoverageMap, KillMap, MutantRecord, Operator, Outcome, TestCaseRecord};
use crate::error::{Error, Result};
use crate::io::{check_header, csv_reader, malformed, read_to_string, write_csv};

pub const MUTANTS_HEADER: [&str; 7] = [
    "mutant_id",
    "operator",
    "class_name",
    "method_signature",
    "line",
    "before",
    "after",
];
pub const COVERAGE_HEADER: [&str; 3] = ["mutant_id", "test_id", "hits"];
pub const KILLMAP_HEADER: [&str; 3] = ["mutant_id", "test_id", "outcome"];
pub const TESTS_HEADER: [&str; 3] = ["test_id", "qualified_name", "source_text"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogFormat {
    /// `mutants.csv` with the canonical header.
    Canonical,
    /// Major's `mutants.log`: `id:op:from:to:location:line:before |==> after`.
    MajorLog,
}

pub fn ingest_mutant_log(path: &Path, format: LogFormat) -> Result<Vec<MutantRecord>> {
    match format {
        LogFormat::Canonical => ingest_canonical(path),
        LogFormat::MajorLog => {
            let text = read_to_string(path)?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    parse_major_line(l).map_err(|reason| match reason {
                        Error::InvalidParameter(reason) => Error::Malformed {
                            path: path.to_path_buf(),
                            line: i as u64 + 1,
                            raw: l.to_string(),
                            reason,
                        },
                        other => other,
                    })
                })
                .collect()
        }
    }
}

fn parse_id(field: &str, what: &str) -> std::result::Result<u64, String> {
    match field.trim().parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{what} must be a positive integer, got `{field}`")),
    }
}

fn ingest_canonical(path: &Path) -> Result<Vec<MutantRecord>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &MUTANTS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != MUTANTS_HEADER.len() {
            return Err(malformed(
                path,
                &rec,
                format!("expected {} fields, found {}", MUTANTS_HEADER.len(), rec.len()),
            ));
        }
        let mutant_id = parse_id(&rec[0], "mutant_id").map_err(|r| malformed(path, &rec, r))?;
        let operator: Operator = rec[1].trim().parse()?;
        let line = parse_id(&rec[4], "line").map_err(|r| malformed(path, &rec, r))? as u32;
        let method = rec[3].trim();
        out.push(MutantRecord {
            mutant_id,
            operator,
            class_name: rec[2].trim().to_string(),
            method_signature: (!method.is_empty()).then(|| method.to_string()),
            line,
            before: rec[5].to_string(),
            after: rec[6].to_string(),
            inside_method: !method.is_empty(),
        });
    }
    Ok(out)
}

/// Parses one Major log line. Errors carry only the reason; callers add
/// the position.
pub fn parse_major_line(line: &str) -> Result<MutantRecord> {
    let bad = |r: String| Error::InvalidParameter(r);
    let parts: Vec<&str> = line.splitn(7, ':').collect();
    if parts.len() != 7 {
        return Err(bad(format!("expected 7 `:`-separated fields, found {}", parts.len())));
    }
    let mutant_id = parse_id(parts[0], "mutant id").map_err(bad)?;
    let operator: Operator = parts[1].trim().parse()?;
    let location = parts[4].trim();
    let line_no = parse_id(parts[5], "line").map_err(bad)? as u32;
    let (before, after) = parts[6]
        .split_once("|==>")
        .ok_or_else(|| bad("missing `|==>` separator".into()))?;
    let after = after.trim();
    let after = if after == "<NO-OP>" { "" } else { after };
    let (class_name, method) = match location.split_once('@') {
        Some((c, m)) if m != "<clinit>" && !m.is_empty() => (c, Some(m.to_string())),
        Some((c, _)) => (c, None),
        None => (location, None),
    };
    Ok(MutantRecord {
        mutant_id,
        operator,
        class_name: class_name.to_string(),
        inside_method: method.is_some(),
        method_signature: method,
        line: line_no,
        before: before.trim().to_string(),
        after: after.to_string(),
    })
}

pub fn ingest_coverage(path: &Path) -> Result<CoverageMap> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &COVERAGE_HEADER)?;
    let mut map = CoverageMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(malformed(path, &rec, "expected 3 fields"));
        }
        let m = parse_id(&rec[0], "mutant_id").map_err(|r| malformed(path, &rec, r))?;
        let t = parse_id(&rec[1], "test_id").map_err(|r| malformed(path, &rec, r))?;
        let hits: i64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| malformed(path, &rec, "hits is not an integer"))?;
        if hits <= 0 {
            return Err(malformed(path, &rec, "hits must be at least 1 for a covered pair"));
        }
        let hits = u32::try_from(hits).map_err(|_| malformed(path, &rec, "hits out of range"))?;
        if map.insert((m, t), hits).is_some() {
            return Err(Error::DuplicateEntry {
                mutant_id: m,
                test_id: t,
            });
        }
    }
    Ok(map)
}

pub fn ingest_kill_map(path: &Path) -> Result<KillMap> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &KILLMAP_HEADER)?;
    let mut map = KillMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(malformed(path, &rec, "expected 3 fields"));
        }
        let m = parse_id(&rec[0], "mutant_id").map_err(|r| malformed(path, &rec, r))?;
        let t = parse_id(&rec[1], "test_id").map_err(|r| malformed(path, &rec, r))?;
        let outcome: Outcome = rec[2].trim().parse()?;
        if map.insert((m, t), outcome).is_some() {
            return Err(Error::DuplicateEntry {
                mutant_id: m,
                test_id: t,
            });
        }
    }
    Ok(map)
}

pub fn ingest_tests(path: &Path) -> Result<Vec<TestCaseRecord>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &TESTS_HEADER)?;
    let mut out: Vec<TestCaseRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(malformed(path, &rec, "expected 3 fields"));
        }
        let test_id = parse_id(&rec[0], "test_id").map_err(|r| malformed(path, &rec, r))?;
        out.push(TestCaseRecord {
            test_id,
            qualified_name: rec[1].trim().to_string(),
            source_text: rec[2].to_string(),
        });
    }
    let mut ids: Vec<u64> = out.iter().map(|t| t.test_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Inconsistent(format!("duplicate test id {}", w[0])));
    }
    Ok(out)
}

pub fn write_mutants(path: &Path, mutants: &[MutantRecord]) -> Result<()> {
    write_csv(path, &MUTANTS_HEADER, |w| {
        for m in mutants {
            w.write_record([
                m.mutant_id.to_string().as_str(),
                m.operator.as_str(),
                &m.class_name,
                m.method_signature.as_deref().unwrap_or(""),
                &m.line.to_string(),
                &m.before,
                &m.after,
            ])?;
        }
        Ok(())
    })
}

pub fn write_coverage(path: &Path, coverage: &CoverageMap) -> Result<()> {
    write_csv(path, &COVERAGE_HEADER, |w| {
        for (&(m, t), &h) in coverage {
            w.write_record([m.to_string(), t.to_string(), h.to_string()])?;
        }
        Ok(())
    })
}

/// Writes every entry, including explicit `LIVE` rows.
pub fn write_kill_map(path: &Path, kills: &KillMap) -> Result<()> {
    write_csv(path, &KILLMAP_HEADER, |w| {
        for (&(m, t), o) in kills {
            w.write_record([m.to_string(), t.to_string(), o.to_string()])?;
        }
        Ok(())
    })
}

pub fn write_tests(path: &Path, tests: &[TestCaseRecord]) -> Result<()> {
    write_csv(path, &TESTS_HEADER, |w| {
        for t in tests {
            w.write_record([t.test_id.to_string().as_str(), &t.qualified_name, &t.source_text])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn major_line_inside_method() {
        let m = parse_major_line("12:ROR:<=(int,int):>=(int,int):org.x.C@max(int,int):42:a <= b |==> a >= b").unwrap();
        assert_eq!(m.mutant_id, 12);
        assert_eq!(m.operator, Operator::ROR);
        assert_eq!(m.class_name, "org.x.C");
        assert_eq!(m.method_signature.as_deref(), Some("max(int,int)"));
        assert!(m.inside_method);
        assert_eq!((m.before.as_str(), m.after.as_str()), ("a <= b", "a >= b"));
    }

    #[test]
    fn major_line_static_init_and_deletion() {
        let m = parse_major_line("3:STD:<EXPR>:<NO-OP>:org.x.C@<clinit>:7:count++ |==> <NO-OP>").unwrap();
        assert!(!m.inside_method);
        assert_eq!(m.method_signature, None);
        assert_eq!(m.after, "");
        let f = parse_major_line("4:LVR:0:1:org.x.C:3:16 |==> 17").unwrap();
        assert!(!f.inside_method);
    }

    #[test]
    fn major_line_errors() {
        assert!(matches!(parse_major_line("1:ROR:x"), Err(Error::InvalidParameter(_))));
        assert!(matches!(parse_major_line("1:XXX:a:b:C:1:a |==> b"), Err(Error::UnknownOperator(t)) if t == "XXX"));
    }
}
