//! Test-case feature group.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::callgraph::for_each_method;
use super::features::mccabe;
use super::parser::{parse_members, parse_source, ParsedSource};
use crate::corpus::TestCaseRecord;
use crate::error::{Error, Result};

pub const ASSERTION_NAMES: [&str; 10] = [
    "assertEquals",
    "assertTrue",
    "assertFalse",
    "assertNull",
    "assertNotNull",
    "assertSame",
    "assertNotSame",
    "assertThrows",
    "assertArrayEquals",
    "fail",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestFeatures {
    pub assertion_number: u32,
    pub has_throw: bool,
    pub lines_in_test_case: u32,
    pub test_complexity: u32,
}

struct Assertions(u32);

impl<'a> Visit<'a> for Assertions {
    fn expr(&mut self, e: &'a Expr) {
        if let ExprKind::MethodCall { name, .. } = &e.kind {
            if ASSERTION_NAMES.contains(&name.as_str()) {
                self.0 += 1;
            }
        }
    }
}

fn find_method<'a>(ps: &'a ParsedSource, name: &str) -> Option<&'a MethodDecl> {
    let mut all = Vec::new();
    for t in &ps.unit.types {
        for_each_method(t, &mut |md, _, _| all.push(md));
    }
    all.iter()
        .find(|m| m.name == name)
        .or(if all.len() == 1 { all.first() } else { None })
        .copied()
}

pub fn method_features(md: &MethodDecl) -> TestFeatures {
    let mut a = Assertions(0);
    if let Some(b) = &md.body {
        walk_block(&mut a, b);
    }
    TestFeatures {
        assertion_number: a.0,
        has_throw: !md.throws.is_empty(),
        lines_in_test_case: md.body.as_ref().map_or(0, |b| b.span.line_count()),
        test_complexity: mccabe(md),
    }
}

/// Features of a test whose source is either a bare method or a whole
/// class containing it.
pub fn test_features(test: &TestCaseRecord) -> Result<TestFeatures> {
    let name = test.method_name();
    let ctx = |e: Error| e.context(format!("test {} ({})", test.test_id, test.qualified_name));
    let parsed = match parse_members(&test.source_text) {
        Ok(ps) => ps,
        Err(members_err) => parse_source(&test.source_text).map_err(|_| ctx(members_err))?,
    };
    let md = find_method(&parsed, name)
        .ok_or_else(|| ctx(Error::Inconsistent(format!("method `{name}` not found in test source"))))?;
    Ok(method_features(md))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(src: &str) -> TestCaseRecord {
        TestCaseRecord {
            test_id: 1,
            qualified_name: "p.CTest#t".into(),
            source_text: src.into(),
        }
    }

    #[test]
    fn counts_assertions_and_throws() {
        let f = test_features(&rec(
            "@Test\nvoid t() throws IOException {\n  assertEquals(1, x());\n  Assert.assertEquals(2, y());\n  if (z) fail(\"no\");\n}",
        ))
        .unwrap();
        assert_eq!(f.assertion_number, 3);
        assert!(f.has_throw);
        assert_eq!(f.lines_in_test_case, 5);
        assert_eq!(f.test_complexity, 2);
    }

    #[test]
    fn empty_body_in_full_class() {
        let f = test_features(&rec("class CTest {\n  void other() {}\n  void t() {\n  }\n}")).unwrap();
        assert_eq!(
            f,
            TestFeatures {
                assertion_number: 0,
                has_throw: false,
                lines_in_test_case: 2,
                test_complexity: 1,
            }
        );
    }

    #[test]
    fn unparsable_source_is_an_error() {
        assert!(test_features(&rec("void t( {")).is_err());
    }
}
