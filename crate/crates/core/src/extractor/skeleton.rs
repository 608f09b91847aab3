//! Abstraction of a condition's boolean structure before and after mutation.
//!
//! A condition is split on top-level `&&` / `||` into sub-conditions.
//! Parenthesized sub-conditions are split recursively and a leading `!` is
//! absorbed. When both sides have the same number of sub-conditions, a
//! relational sub-condition keeps its operator (`expr1 > expr2`); otherwise
//! every sub-condition becomes a numbered `exprN` placeholder. A side with
//! exactly one placeholder renders it unnumbered as `expr`.

use serde_json::Value;

use super::lexer::fragment_tokens;
use crate::error::Result;

/// Pair of abstracted conditions, or nothing for non-conditional mutations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Skeleton(pub Option<(String, String)>);

impl Skeleton {
    pub fn empty() -> Self {
        Skeleton(None)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn to_json(&self) -> String {
        match &self.0 {
            None => "[]".to_string(),
            Some((b, a)) => Value::Array(vec![Value::String(b.clone()), Value::String(a.clone())]).to_string(),
        }
    }
}

#[derive(Debug, Clone)]
enum Cond {
    Leaf(Vec<String>),
    Group(Box<Cond>),
    Chain(Vec<Cond>, Vec<String>),
}

const RELATIONAL: &[&str] = &["==", "!=", ">=", "<=", ">", "<"];

fn depth_delta(tok: &str) -> i32 {
    match tok {
        "(" | "[" | "{" => 1,
        ")" | "]" | "}" => -1,
        _ => 0,
    }
}

fn parse_cond(tokens: &[String]) -> Cond {
    let mut toks = tokens;
    while toks.first().is_some_and(|t| t == "!") {
        toks = &toks[1..];
    }
    // Top-level ternary or lambda: keep the whole thing as one leaf.
    let mut depth = 0;
    let mut parts: Vec<&[String]> = Vec::new();
    let mut ops = Vec::new();
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        depth += depth_delta(t);
        if depth == 0 {
            if t == "?" || t == "->" {
                return Cond::Leaf(toks.to_vec());
            }
            if t == "&&" || t == "||" {
                parts.push(&toks[start..i]);
                ops.push(t.clone());
                start = i + 1;
            }
        }
    }
    parts.push(&toks[start..]);
    if parts.len() > 1 {
        return Cond::Chain(parts.into_iter().map(parse_cond).collect(), ops);
    }
    if is_wrapped(toks) {
        let inner = parse_cond(&toks[1..toks.len() - 1]);
        return match inner {
            Cond::Chain(..) => Cond::Group(Box::new(inner)),
            other => other,
        };
    }
    Cond::Leaf(toks.to_vec())
}

/// True when the first `(` closes at the last token.
fn is_wrapped(toks: &[String]) -> bool {
    if toks.len() < 2 || toks[0] != "(" || toks[toks.len() - 1] != ")" {
        return false;
    }
    let mut depth = 0;
    for (i, t) in toks.iter().enumerate() {
        depth += depth_delta(t);
        if depth == 0 && i + 1 < toks.len() {
            return false;
        }
    }
    true
}

fn leaf_count(c: &Cond) -> usize {
    match c {
        Cond::Leaf(t) => usize::from(!t.is_empty()),
        Cond::Group(inner) => leaf_count(inner),
        Cond::Chain(parts, _) => parts.iter().map(leaf_count).sum(),
    }
}

/// Top-level relational operator of a leaf, preferring equality operators.
fn relational_op(toks: &[String]) -> Option<&str> {
    let mut depth = 0;
    let mut first_rel: Option<&str> = None;
    for t in toks {
        depth += depth_delta(t);
        if depth != 0 {
            continue;
        }
        if t == "==" || t == "!=" {
            return Some(t.as_str());
        }
        if first_rel.is_none() && RELATIONAL.contains(&t.as_str()) {
            first_rel = Some(t.as_str());
        }
    }
    first_rel
}

struct Render {
    keep_relational: bool,
    parenthesize: bool,
    slots: Vec<usize>,
    next: usize,
}

impl Render {
    fn slot(&mut self, out: &mut String) {
        self.next += 1;
        self.slots.push(out.len());
        out.push_str("expr");
    }

    fn cond(&mut self, c: &Cond, out: &mut String) {
        match c {
            Cond::Leaf(toks) => {
                if toks.is_empty() {
                    return;
                }
                match self.keep_relational.then(|| relational_op(toks)).flatten() {
                    Some(op) => {
                        if self.parenthesize {
                            out.push('(');
                        }
                        self.slot(out);
                        out.push(' ');
                        out.push_str(op);
                        out.push(' ');
                        self.slot(out);
                        if self.parenthesize {
                            out.push(')');
                        }
                    }
                    None => self.slot(out),
                }
            }
            Cond::Group(inner) => {
                out.push('(');
                self.cond(inner, out);
                out.push(')');
            }
            Cond::Chain(parts, ops) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                        out.push_str(&ops[i - 1]);
                        out.push(' ');
                    }
                    self.cond(p, out);
                }
            }
        }
    }
}

fn render(c: &Cond, keep_relational: bool) -> String {
    let mut r = Render {
        keep_relational,
        parenthesize: leaf_count(c) > 1,
        slots: Vec::new(),
        next: 0,
    };
    let mut out = String::new();
    r.cond(c, &mut out);
    if r.slots.len() == 1 {
        return out;
    }
    // Number placeholders left to right, back to front to keep offsets valid.
    for (k, &pos) in r.slots.iter().enumerate().rev() {
        out.insert_str(pos + 4, &(k + 1).to_string());
    }
    out
}

pub fn skeleton_tokens(before: &[String], after: &[String]) -> Skeleton {
    let b = parse_cond(before);
    let a = parse_cond(after);
    let same = leaf_count(&b) == leaf_count(&a);
    Skeleton(Some((render(&b, same), render(&a, same))))
}

pub fn skeleton_modification(before_cond: &str, after_cond: &str) -> Result<Skeleton> {
    let b = fragment_tokens(before_cond)?;
    let a = fragment_tokens(after_cond)?;
    Ok(skeleton_tokens(&b, &a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sk(b: &str, a: &str) -> (String, String) {
        skeleton_modification(b, a).unwrap().0.unwrap()
    }

    #[test]
    fn count_change_abstracts_everything() {
        assert_eq!(
            sk(
                "allStringsNull || longestStrLen == 0 && !anyStringNull",
                "longestStrLen == 0 && !anyStringNull"
            ),
            ("expr1 || expr2 && expr3".into(), "expr1 && expr2".into())
        );
    }

    #[test]
    fn equal_counts_keep_relational() {
        assert_eq!(
            sk("src.length > srcPos + 1 && src[srcPos + 1]", "false && src[srcPos + 1]"),
            ("(expr1 > expr2) && expr3".into(), "expr1 && expr2".into())
        );
        assert_eq!(sk("a == b", "false"), ("expr1 == expr2".into(), "expr".into()));
        assert_eq!(
            sk("a == b", "a != b"),
            ("expr1 == expr2".into(), "expr1 != expr2".into())
        );
    }

    #[test]
    fn nested_groups_and_negation() {
        assert_eq!(
            sk("!(a || b) && c.isEmpty()", "(a || b) && !c.isEmpty()"),
            ("(expr1 || expr2) && expr3".into(), "(expr1 || expr2) && expr3".into())
        );
        assert_eq!(
            sk("(x < y)", "(x <= y)"),
            ("expr1 < expr2".into(), "expr1 <= expr2".into())
        );
    }

    #[test]
    fn ternary_is_a_single_leaf() {
        assert_eq!(sk("a ? b : c || d", "true"), ("expr".into(), "expr".into()));
    }

    #[test]
    fn generic_call_is_not_split() {
        assert_eq!(
            sk("check(a && b, c)", "check(a || b, c)"),
            ("expr".into(), "expr".into())
        );
    }

    #[test]
    fn json_form() {
        assert_eq!(Skeleton::empty().to_json(), "[]");
        let s = skeleton_modification("a == b", "false").unwrap();
        assert_eq!(s.to_json(), r#"["expr1 == expr2","expr"]"#);
    }
}
