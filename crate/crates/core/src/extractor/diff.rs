//! Token-level before/after diff of a mutated fragment.

use std::fmt;

use serde_json::Value;

use super::lexer::fragment_tokens;
use crate::error::Result;

/// One side of a diff: nothing, a single token, or a token run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DiffSide {
    Empty,
    Token(String),
    Tokens(Vec<String>),
}

impl DiffSide {
    fn from_tokens(mut tokens: Vec<String>) -> Self {
        match tokens.len() {
            0 => DiffSide::Empty,
            // A lone `EMPTY` identifier must not collide with the empty marker.
            1 if tokens[0] != EMPTY => DiffSide::Token(tokens.pop().unwrap()),
            _ => DiffSide::Tokens(tokens),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            DiffSide::Empty => Value::String(EMPTY.into()),
            DiffSide::Token(t) => Value::String(t.clone()),
            DiffSide::Tokens(ts) => Value::Array(ts.iter().cloned().map(Value::String).collect()),
        }
    }

    fn write_py(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffSide::Empty => write!(f, "'{EMPTY}'"),
            DiffSide::Token(t) => write!(f, "'{t}'"),
            DiffSide::Tokens(ts) => {
                write!(f, "[")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "'{t}'")?;
                }
                write!(f, "]")
            }
        }
    }
}

const EMPTY: &str = "EMPTY";

/// Removed and added tokens under a longest-common-subsequence alignment.
///
/// Renders as `[]` when the fragments are identical, otherwise as a
/// two-element list `[removed, added]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StatementDiff {
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

impl StatementDiff {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    pub fn sides(&self) -> Option<(DiffSide, DiffSide)> {
        if self.is_empty() {
            None
        } else {
            Some((
                DiffSide::from_tokens(self.removed.clone()),
                DiffSide::from_tokens(self.added.clone()),
            ))
        }
    }

    /// Compact JSON encoding used as the categorical value.
    pub fn to_json(&self) -> String {
        let value = match self.sides() {
            None => Value::Array(Vec::new()),
            Some((r, a)) => Value::Array(vec![r.to_json(), a.to_json()]),
        };
        value.to_string()
    }

    pub fn swapped(&self) -> StatementDiff {
        StatementDiff {
            removed: self.added.clone(),
            added: self.removed.clone(),
        }
    }
}

/// Python-list style, e.g. `['<=', '>=']`.
impl fmt::Display for StatementDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sides() {
            None => write!(f, "[]"),
            Some((r, a)) => {
                write!(f, "[")?;
                r.write_py(f)?;
                write!(f, ", ")?;
                a.write_py(f)?;
                write!(f, "]")
            }
        }
    }
}

pub fn statement_diff(before: &str, after: &str) -> Result<StatementDiff> {
    let a = fragment_tokens(before)?;
    let b = fragment_tokens(after)?;
    Ok(diff_tokens(&a, &b))
}

pub fn diff_tokens(a: &[String], b: &[String]) -> StatementDiff {
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let mut lcs = vec![0u32; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[idx(i, j)] = if a[i] == b[j] {
                lcs[idx(i + 1, j + 1)] + 1
            } else {
                lcs[idx(i + 1, j)].max(lcs[idx(i, j + 1)])
            };
        }
    }
    let mut removed = Vec::new();
    let mut added = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            i += 1;
            j += 1;
            continue;
        }
        let skip_a = lcs[idx(i + 1, j)];
        let skip_b = lcs[idx(i, j + 1)];
        // Ties drop the lexicographically smaller token first, which keeps
        // the alignment symmetric under swapping the inputs.
        if skip_a > skip_b || (skip_a == skip_b && a[i] < b[j]) {
            removed.push(a[i].clone());
            i += 1;
        } else {
            added.push(b[j].clone());
            j += 1;
        }
    }
    removed.extend(a[i..].iter().cloned());
    added.extend(b[j..].iter().cloned());
    StatementDiff { removed, added }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relational_swap() {
        let d = statement_diff("a <= b", "a >= b").unwrap();
        assert_eq!(d.to_string(), "['<=', '>=']");
        assert_eq!(d.to_json(), r#"["<=",">="]"#);
    }

    #[test]
    fn deletion() {
        let d = statement_diff("x++;", "").unwrap();
        assert_eq!(d.to_string(), "[['x', '++', ';'], 'EMPTY']");
        assert_eq!(d.to_json(), r#"[["x","++",";"],"EMPTY"]"#);
    }

    #[test]
    fn identical() {
        let d = statement_diff("return a + b;", "return a + b;").unwrap();
        assert!(d.is_empty());
        assert_eq!(d.to_json(), "[]");
    }

    #[test]
    fn literal_named_empty_is_not_the_marker() {
        let d = statement_diff("EMPTY", "").unwrap();
        assert_eq!(d.to_json(), r#"[["EMPTY"],"EMPTY"]"#);
    }

    #[test]
    fn multi_hunk() {
        let d = statement_diff("a + b * c", "a - b / c").unwrap();
        assert_eq!(d.removed, ["+", "*"]);
        assert_eq!(d.added, ["-", "/"]);
    }
}
