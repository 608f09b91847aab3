//! A parsed source tree and the per-pair feature assembly over it.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ast::*;
use super::callgraph::{CallGraph, MethodId};
use super::diff::diff_tokens;
use super::features::*;
use super::lexer::{fragment_tokens, merge_angles};
use super::parser::{parse_source, ParsedSource};
use super::skeleton::{skeleton_tokens, Skeleton};
use super::testcase::{test_features, TestFeatures};
use super::vector::{FeatureVector, PairRow};
use crate::corpus::{Corpus, MutantRecord, Operator};
use crate::error::{Error, Result};

/// Source-code and change features of one mutant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantFeatures {
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
    pub declared_variable_type: String,
    pub variable_is_final_new: bool,
    pub mutation_operator: Operator,
    pub statement_diff: String,
    pub skeleton_modification: String,
}

/// Path from a compilation unit to a (possibly nested) type declaration.
#[derive(Debug, Clone)]
struct TypePath {
    file: usize,
    top: usize,
    members: Vec<usize>,
}

pub struct Project {
    files: Vec<ParsedSource>,
    paths: Vec<PathBuf>,
    types: HashMap<String, Vec<TypePath>>,
    simple: HashMap<String, Vec<TypePath>>,
    supertypes: HashMap<String, Vec<String>>,
    graph: CallGraph,
}

fn collect_java(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_java(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "java") {
            out.push(path);
        }
    }
    Ok(())
}

impl Project {
    /// Parses every `.java` file under `dir`, in sorted path order.
    pub fn load_dir(dir: &Path) -> Result<Project> {
        let mut paths = Vec::new();
        collect_java(dir, &mut paths)?;
        paths.sort();
        let texts = paths
            .iter()
            .map(|p| fs::read_to_string(p).map_err(|e| Error::io(p, e)))
            .collect::<Result<Vec<_>>>()?;
        let files = texts
            .par_iter()
            .zip(&paths)
            .map(|(t, p)| parse_source(t).map_err(|e| e.context(p.display().to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Project::from_parsed(files, paths))
    }

    /// Builds a project from in-memory sources named by `(path, text)`.
    pub fn from_sources(sources: &[(String, String)]) -> Result<Project> {
        let files = sources
            .par_iter()
            .map(|(p, t)| parse_source(t).map_err(|e| e.context(p.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Project::from_parsed(
            files,
            sources.iter().map(|(p, _)| PathBuf::from(p)).collect(),
        ))
    }

    fn from_parsed(files: Vec<ParsedSource>, paths: Vec<PathBuf>) -> Project {
        let mut types: HashMap<String, Vec<TypePath>> = HashMap::new();
        let mut simple: HashMap<String, Vec<TypePath>> = HashMap::new();
        let mut supertypes: HashMap<String, Vec<String>> = HashMap::new();
        for (fi, f) in files.iter().enumerate() {
            let prefix = f.unit.package.clone().map(|p| p + ".").unwrap_or_default();
            for (ti, t) in f.unit.types.iter().enumerate() {
                let mut stack = vec![(
                    t,
                    format!("{prefix}{}", t.name),
                    TypePath {
                        file: fi,
                        top: ti,
                        members: Vec::new(),
                    },
                )];
                while let Some((t, qualified, path)) = stack.pop() {
                    let sup = supertypes.entry(t.name.clone()).or_default();
                    sup.extend(
                        t.extends
                            .iter()
                            .chain(&t.implements)
                            .map(|r| r.simple_name().to_string()),
                    );
                    for (mi, m) in t.members.iter().enumerate() {
                        if let Member::Type(inner) = m {
                            let mut p = path.clone();
                            p.members.push(mi);
                            stack.push((inner, format!("{qualified}.{}", inner.name), p));
                        }
                    }
                    simple.entry(t.name.clone()).or_default().push(path.clone());
                    types.entry(qualified).or_default().push(path);
                }
            }
        }
        let graph = CallGraph::build(&files);
        Project {
            files,
            paths,
            types,
            simple,
            supertypes,
            graph,
        }
    }

    pub fn files(&self) -> &[ParsedSource] {
        &self.files
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    fn type_at(&self, p: &TypePath) -> &TypeDecl {
        let mut t = &self.files[p.file].unit.types[p.top];
        for &mi in &p.members {
            if let Member::Type(inner) = &t.members[mi] {
                t = inner;
            }
        }
        t
    }

    /// Resolves a binary class name (`a.b.Outer$Inner$1`) to its innermost
    /// named declaration; anonymous segments are dropped.
    fn resolve_type(&self, class_name: &str) -> Option<(usize, &TypeDecl)> {
        let named: Vec<&str> = class_name
            .split('$')
            .filter(|s| !s.is_empty() && !s.chars().all(|c| c.is_ascii_digit()))
            .collect();
        let qualified = named.join(".");
        let simple = named.last().map(|s| s.rsplit('.').next().unwrap_or(s)).unwrap_or("");
        let path = self
            .types
            .get(&qualified)
            .and_then(|v| v.first())
            .or_else(|| self.simple.get(simple).and_then(|v| v.first()))?;
        Some((path.file, self.type_at(path)))
    }

    fn supertypes_of(&self, name: &str) -> Vec<String> {
        self.supertypes.get(name).cloned().unwrap_or_default()
    }

    pub fn mutant_features(&self, m: &MutantRecord) -> Result<MutantFeatures> {
        let unresolved = || Error::UnresolvedSite {
            class: m.class_name.clone(),
            line: m.line,
        };
        let (fi, ty) = self.resolve_type(&m.class_name).ok_or_else(unresolved)?;
        let src = &self.files[fi];
        let before = fragment_tokens(&m.before).map_err(|e| e.context(format!("mutant {}", m.mutant_id)))?;
        let after = fragment_tokens(&m.after).map_err(|e| e.context(format!("mutant {}", m.mutant_id)))?;
        let sites = SiteCollector::collect(ty);
        let site = resolve_site(src, &sites, m.line, &before).ok_or_else(unresolved)?;

        let method = site.method.filter(|_| m.inside_method);
        let (lines_in_method, source_complexity, call, callby) = match method {
            Some(md) => {
                let id = MethodId {
                    file: fi,
                    start: md.span.lo,
                };
                (
                    md.span.line_count(),
                    mccabe(md),
                    self.graph.call(id),
                    self.graph.callby(id),
                )
            }
            None => (0, 0, 0, 0),
        };
        let cond = match site.kind {
            SiteKind::Stmt(s) => conditional_features(src, s, &returned_variables(ty)),
            _ => ConditionalFeatures::default(),
        };
        let decl = declaration_features(&site, &|n| self.supertypes_of(n));
        let diff = diff_tokens(&before, &after);
        let skeleton = condition_expr(&site)
            .map(|c| condition_skeleton(src, c, &before, &after))
            .unwrap_or_else(Skeleton::empty);

        Ok(MutantFeatures {
            statement_type: statement_type(&site).to_string(),
            parent_context_type: parent_context_type(&site).to_string(),
            lines_in_method,
            source_complexity,
            call,
            callby,
            conditional_block_loc: cond.block_loc,
            conditional_block_count: cond.block_count,
            nesting_level: site.conditionals.len() as u32,
            occurring_count: cond.occurring_count,
            has_return_or_throw: cond.has_return_or_throw,
            declared_variable_type: decl.declared_type,
            variable_is_final_new: decl.final_or_new,
            mutation_operator: m.operator,
            statement_diff: diff.to_json(),
            skeleton_modification: skeleton.to_json(),
        })
    }
}

fn find_run(hay: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Skeleton of the condition before and after applying the fragment edit.
fn condition_skeleton(src: &ParsedSource, cond: &Expr, before: &[String], after: &[String]) -> Skeleton {
    let cond_toks: Vec<String> = merge_angles(src.tokens_of(cond.span))
        .into_iter()
        .map(|t| t.text)
        .collect();
    let mut b = before;
    let mut a = after;
    while b.last().is_some_and(|t| t == ";") && a.last().is_some_and(|t| t == ";") {
        b = &b[..b.len() - 1];
        a = &a[..a.len() - 1];
    }
    let after_cond = if let Some(p) = find_run(&cond_toks, b) {
        let mut v = cond_toks[..p].to_vec();
        v.extend_from_slice(a);
        v.extend_from_slice(&cond_toks[p + b.len()..]);
        v
    } else if let Some(q) = find_run(b, &cond_toks) {
        // The fragment spans the whole condition: keep the after tokens
        // between the shared context.
        let tail = b.len() - q - cond_toks.len();
        if a.len() < q + tail || a[..q] != b[..q] || a[a.len() - tail..] != b[b.len() - tail..] {
            return Skeleton::empty();
        }
        a[q..a.len() - tail].to_vec()
    } else {
        return Skeleton::empty();
    };
    if after_cond.is_empty() {
        return Skeleton::empty();
    }
    skeleton_tokens(&cond_toks, &after_cond)
}

pub fn assemble_vector(mf: &MutantFeatures, tf: &TestFeatures, hits: u32) -> FeatureVector {
    FeatureVector {
        statement_type: mf.statement_type.clone(),
        parent_context_type: mf.parent_context_type.clone(),
        lines_in_method: mf.lines_in_method,
        source_complexity: mf.source_complexity,
        call: mf.call,
        callby: mf.callby,
        conditional_block_loc: mf.conditional_block_loc,
        conditional_block_count: mf.conditional_block_count,
        nesting_level: mf.nesting_level,
        occurring_count: mf.occurring_count,
        has_return_or_throw: mf.has_return_or_throw,
        declared_variable_type: mf.declared_variable_type.clone(),
        variable_is_final_new: mf.variable_is_final_new,
        mutation_operator: mf.mutation_operator,
        statement_diff: mf.statement_diff.clone(),
        skeleton_modification: mf.skeleton_modification.clone(),
        hits_number: hits,
        assertion_number: tf.assertion_number,
        has_throw: if tf.has_throw { "throws" } else { "" }.to_string(),
        lines_in_test_case: tf.lines_in_test_case,
        test_complexity: tf.test_complexity,
    }
}

/// Feature rows for every covered pair, ordered by (mutant, test).
pub fn extract_rows(project: &Project, corpus: &Corpus) -> Result<Vec<PairRow>> {
    let covered: HashSet<u64> = corpus.covered_mutants().into_iter().collect();
    let mutants: HashMap<u64, MutantFeatures> = corpus
        .mutants
        .par_iter()
        .filter(|m| covered.contains(&m.mutant_id))
        .map(|m| project.mutant_features(m).map(|f| (m.mutant_id, f)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let tests: HashMap<u64, TestFeatures> = corpus
        .tests
        .par_iter()
        .map(|t| test_features(t).map(|f| (t.test_id, f)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    corpus
        .pairs()?
        .into_iter()
        .map(|p| {
            let mf = &mutants[&p.mutant_id];
            let tf = tests
                .get(&p.test_id)
                .ok_or_else(|| Error::Inconsistent(format!("unknown test {}", p.test_id)))?;
            Ok(PairRow {
                mutant_id: p.mutant_id,
                test_id: p.test_id,
                features: assemble_vector(mf, tf, p.hits),
                outcome: p.outcome,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "package p;\n\
public class Calc {\n\
    static final int LIMIT = 10;\n\
    int total(int a, int b) {\n\
        int s = a + b;\n\
        if (a <= b && s > 0) {\n\
            s = helper(s);\n\
        }\n\
        return s;\n\
    }\n\
    int helper(int x) { return x * 2; }\n\
    class Inner {\n\
        boolean ok(int v) { return v == LIMIT; }\n\
    }\n\
}\n";

    fn project() -> Project {
        Project::from_sources(&[("p/Calc.java".into(), SRC.into())]).unwrap()
    }

    fn mutant(line: u32, op: Operator, before: &str, after: &str, class: &str, inside: bool) -> MutantRecord {
        MutantRecord {
            mutant_id: 1,
            operator: op,
            class_name: class.into(),
            method_signature: inside.then(|| "m()".into()),
            line,
            before: before.into(),
            after: after.into(),
            inside_method: inside,
        }
    }

    #[test]
    fn conditional_mutant() {
        let f = project()
            .mutant_features(&mutant(6, Operator::ROR, "a <= b", "a >= b", "p.Calc", true))
            .unwrap();
        assert_eq!(f.statement_type, "IF");
        assert_eq!(f.parent_context_type, "MethodDeclaration");
        assert_eq!(f.lines_in_method, 7);
        assert_eq!(f.source_complexity, 3);
        assert_eq!(f.call, 1);
        assert_eq!(f.statement_diff, r#"["<=",">="]"#);
        assert_eq!(
            f.skeleton_modification,
            r#"["(expr1 <= expr2) && (expr3 > expr4)","(expr1 >= expr2) && (expr3 > expr4)"]"#
        );
        assert_eq!(f.conditional_block_loc, 1);
        assert_eq!(f.occurring_count, 2);
    }

    #[test]
    fn outside_method_mutant_is_zeroed() {
        let f = project()
            .mutant_features(&mutant(3, Operator::LVR, "10", "0", "p.Calc", false))
            .unwrap();
        assert_eq!(f.statement_type, "MemberDeclaration");
        assert_eq!(f.parent_context_type, "Block");
        assert_eq!((f.lines_in_method, f.source_complexity, f.call, f.callby), (0, 0, 0, 0));
        assert_eq!(f.declared_variable_type, "NUMERIC");
        assert!(f.variable_is_final_new);
        assert_eq!(f.skeleton_modification, "[]");
    }

    #[test]
    fn nested_class_and_callers() {
        let p = project();
        let f = p
            .mutant_features(&mutant(
                13,
                Operator::ROR,
                "v == LIMIT",
                "v != LIMIT",
                "p.Calc$Inner",
                true,
            ))
            .unwrap();
        assert_eq!(f.statement_type, "RETURN");
        let f = p
            .mutant_features(&mutant(11, Operator::AOR, "x * 2", "x / 2", "p.Calc", true))
            .unwrap();
        assert_eq!(f.callby, 1);
    }

    #[test]
    fn unknown_line_is_unresolved() {
        let err = project()
            .mutant_features(&mutant(99, Operator::STD, "x++;", "", "p.Calc", true))
            .unwrap_err();
        assert!(matches!(err, Error::UnresolvedSite { .. }));
    }
}
