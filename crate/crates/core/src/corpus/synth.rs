//! Synthetic corpora with known kill rules.
//!
//! Generated classes are plain Java built from a handful of statement
//! templates, each carrying the mutants applicable to it. Labels come from
//! a [`LabelRule`] evaluated on the operator, the statement diff and the
//! hit count, then flipped independently with probability `noise_rate`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::path::Path;

use super::{Corpus, CoverageMap, KillMap, MutantRecord, Operator, Outcome, TestCaseRecord, SOURCE_DIR};
use crate::error::{Error, Result};
use crate::extractor::diff::statement_diff;
use crate::io::write_atomic;

/// Deterministic kill rule over (operator, statement diff, hits).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    Always,
    OperatorIn(Vec<Operator>),
    /// FNV-1a of the diff's JSON text, modulo `modulus`, below `threshold`.
    DiffHashBelow {
        modulus: u64,
        threshold: u64,
    },
    HitsAtLeast(u32),
    And(Vec<LabelRule>),
    Or(Vec<LabelRule>),
    Not(Box<LabelRule>),
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)
    })
}

impl LabelRule {
    pub fn eval(&self, op: Operator, diff_json: &str, hits: u32) -> bool {
        match self {
            LabelRule::Always => true,
            LabelRule::OperatorIn(ops) => ops.contains(&op),
            LabelRule::DiffHashBelow { modulus, threshold } => {
                fnv1a(diff_json.as_bytes()) % modulus.max(&1) < *threshold
            }
            LabelRule::HitsAtLeast(k) => hits >= *k,
            LabelRule::And(rs) => rs.iter().all(|r| r.eval(op, diff_json, hits)),
            LabelRule::Or(rs) => rs.iter().any(|r| r.eval(op, diff_json, hits)),
            LabelRule::Not(r) => !r.eval(op, diff_json, hits),
        }
    }

    /// Killed iff the diff hashes into the lower 2/5 of its buckets and the
    /// test executes the mutant at all.
    pub fn diff_driven() -> LabelRule {
        LabelRule::And(vec![
            LabelRule::DiffHashBelow {
                modulus: 5,
                threshold: 2,
            },
            LabelRule::HitsAtLeast(1),
        ])
    }

    /// [`LabelRule::diff_driven`] with statement deletions always surviving,
    /// so the label depends on all three inputs.
    pub fn operator_and_diff() -> LabelRule {
        LabelRule::And(vec![
            LabelRule::DiffHashBelow {
                modulus: 5,
                threshold: 2,
            },
            LabelRule::Not(Box::new(LabelRule::OperatorIn(vec![Operator::STD]))),
            LabelRule::HitsAtLeast(1),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Generation stops once at least this many mutants exist.
    pub mutants: usize,
    pub methods_per_class: usize,
    pub statements_per_method: usize,
    pub tests_per_class: usize,
    pub max_tests_per_mutant: usize,
    pub max_hits: u32,
    pub noise_rate: f64,
    pub seed: u64,
    pub rule: LabelRule,
    pub package: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mutants: 2000,
            methods_per_class: 8,
            statements_per_method: 6,
            tests_per_class: 8,
            max_tests_per_mutant: 2,
            max_hits: 5,
            noise_rate: 0.0,
            seed: 0,
            rule: LabelRule::operator_and_diff(),
            package: "synth".into(),
        }
    }
}

/// A generated corpus plus the Java sources it refers to.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// `(relative path, text)` per class.
    pub sources: Vec<(String, String)>,
}

impl SynthCorpus {
    /// Writes the corpus CSVs plus the sources under `src/`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        self.corpus.write_dir(dir)?;
        for (rel, text) in &self.sources {
            write_atomic(&dir.join(SOURCE_DIR).join(rel), text.as_bytes())?;
        }
        Ok(())
    }
}

struct Site {
    line: u32,
    method: Option<String>,
    mutations: Vec<(Operator, String, String)>,
}

struct ClassWriter<'r> {
    rng: &'r mut ChaCha8Rng,
    lines: Vec<String>,
    sites: Vec<Site>,
    /// Drawn from a small pool so call-site diffs stay a small vocabulary.
    helper: String,
}

const VARS: [&str; 2] = ["a", "b"];
const LITERALS: [&str; 4] = ["1", "2", "3", "10"];
const ARITH: [&str; 3] = ["+", "-", "*"];

fn others<'a>(all: &[&'a str], x: &str) -> Vec<&'a str> {
    all.iter().copied().filter(|o| *o != x).collect()
}

impl ClassWriter<'_> {
    fn push(&mut self, text: String) -> u32 {
        self.lines.push(text);
        self.lines.len() as u32
    }

    fn site(&mut self, text: String, method: &str, mutations: Vec<(Operator, String, String)>) {
        let line = self.push(text);
        self.sites.push(Site {
            line,
            method: Some(method.to_string()),
            mutations,
        });
    }

    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(self.rng).copied().unwrap_or_default()
    }

    fn statement(&mut self, sig: &str) {
        let x = self.pick(&VARS);
        let y = self.pick(&VARS);
        let l = self.pick(&LITERALS);
        let m = |op: Operator, b: String, a: String| (op, b, a);
        match self.rng.gen_range(0..9) {
            0 => {
                let op = self.pick(&ARITH);
                let e = format!("{x} {op} {y}");
                let mut muts: Vec<_> = others(&ARITH, op)
                    .into_iter()
                    .map(|o| m(Operator::AOR, e.clone(), format!("{x} {o} {y}")))
                    .collect();
                muts.push(m(Operator::EVR, e.clone(), "0".into()));
                self.site(format!("        s = s + ({e});"), sig, muts);
            }
            1 => {
                let aop = self.pick(&["+=", "-="]);
                let stmt = format!("s {aop} {x} * {l};");
                let lit = self.pick(&others(&LITERALS, l));
                let muts = vec![
                    m(Operator::LVR, l.into(), lit.into()),
                    m(Operator::AOR, format!("{x} * {l}"), format!("{x} / {l}")),
                    m(Operator::STD, stmt.clone(), String::new()),
                ];
                self.site(format!("        {stmt}"), sig, muts);
            }
            2 => {
                let rel = self.pick(&["<", ">", "==", "<="]);
                let cond = format!("{x} {rel} {y}");
                let mut muts: Vec<_> = others(&["<", ">", "==", "<=", "!="], rel)
                    .choose_multiple(self.rng, 2)
                    .map(|r| m(Operator::ROR, cond.clone(), format!("{x} {r} {y}")))
                    .collect();
                muts.push(m(Operator::ROR, cond.clone(), "false".into()));
                self.site(format!("        if ({cond}) {{"), sig, muts);
                let body = vec![
                    m(Operator::AOR, "s + 1".into(), "s - 1".into()),
                    m(Operator::LVR, "1".into(), "0".into()),
                ];
                self.site("            s = s + 1;".into(), sig, body);
                self.push("        }".into());
            }
            3 => {
                let cond = format!("{x} > 0 && {y} < {l}");
                let muts = vec![
                    m(Operator::COR, cond.clone(), format!("{x} > 0 || {y} < {l}")),
                    m(Operator::COR, cond.clone(), format!("{x} > 0")),
                    m(Operator::COR, cond.clone(), format!("{y} < {l}")),
                    m(Operator::ROR, format!("{x} > 0"), format!("{x} >= 0")),
                ];
                self.site(format!("        if ({cond}) {{"), sig, muts);
                self.site(
                    "            return s;".into(),
                    sig,
                    vec![m(Operator::EVR, "s".into(), "0".into())],
                );
                self.push("        }".into());
            }
            4 => {
                let sh = self.pick(&["<<", ">>"]);
                let muts = others(&["<<", ">>", ">>>"], sh)
                    .into_iter()
                    .map(|o| m(Operator::SOR, format!("s {sh} {l}"), format!("s {o} {l}")))
                    .collect();
                self.site(format!("        s = s {sh} {l};"), sig, muts);
            }
            5 => {
                let bop = self.pick(&["&", "|", "^"]);
                let muts = others(&["&", "|", "^"], bop)
                    .into_iter()
                    .map(|o| m(Operator::LOR, format!("s {bop} {x}"), format!("s {o} {x}")))
                    .collect();
                self.site(format!("        s = s {bop} {x};"), sig, muts);
            }
            6 => {
                let muts = vec![
                    m(Operator::ORU, format!("-{x}"), x.to_string()),
                    m(Operator::ORU, format!("-{x}"), format!("~{x}")),
                ];
                self.site(format!("        s = -{x} + s;"), sig, muts);
            }
            7 => {
                let stmt = format!("s = {}(s, {x});", self.helper);
                self.site(
                    format!("        {stmt}"),
                    sig,
                    vec![m(Operator::STD, stmt.clone(), String::new())],
                );
            }
            _ => {
                let cond = format!("s > {l}");
                let muts = vec![
                    m(Operator::ROR, cond.clone(), format!("s >= {l}")),
                    m(Operator::ROR, cond.clone(), format!("s != {l}")),
                ];
                self.site(format!("        while ({cond}) {{"), sig, muts);
                self.site(
                    "            s = s / 2;".into(),
                    sig,
                    vec![m(Operator::AOR, "s / 2".into(), "s % 2".into())],
                );
                self.push("        }".into());
            }
        }
    }

    fn class(&mut self, package: &str, name: &str, methods: usize, statements: usize) {
        self.push(format!("package {package};"));
        self.push(String::new());
        self.push(format!("public class {name} {{"));
        let l = self.pick(&LITERALS);
        let line = self.push(format!("    static int base = {l};"));
        self.sites.push(Site {
            line,
            method: None,
            mutations: vec![(Operator::LVR, l.into(), "0".into())],
        });
        self.push(String::new());
        self.push(format!("    private static int {}(int p, int q) {{", self.helper));
        let sig = format!("{}(int,int)", self.helper);
        self.site(
            "        return p + q;".into(),
            &sig,
            vec![(Operator::AOR, "p + q".into(), "p - q".into())],
        );
        self.push("    }".into());
        for j in 0..methods {
            let sig = format!("m{j}(int,int)");
            self.push(String::new());
            self.push(format!("    public int m{j}(int a, int b) {{"));
            self.push("        int s = base;".into());
            for _ in 0..statements {
                self.statement(&sig);
            }
            self.site(
                "        return s;".into(),
                &sig,
                vec![(Operator::EVR, "s".into(), "0".into())],
            );
            self.push("    }".into());
        }
        self.push("}".into());
    }
}

fn test_source(rng: &mut ChaCha8Rng, class: &str, name: &str, methods: usize) -> String {
    let throws = if rng.gen_bool(0.3) { " throws Exception" } else { "" };
    let mut s = format!("@Test\npublic void {name}(){throws} {{\n    {class} c = new {class}();\n");
    for _ in 0..rng.gen_range(0..=4) {
        let j = rng.gen_range(0..methods);
        let (a, b) = (rng.gen_range(0..5), rng.gen_range(0..5));
        if rng.gen_bool(0.5) {
            s += &format!("    assertEquals({}, c.m{j}({a}, {b}));\n", rng.gen_range(0..20));
        } else {
            s += &format!("    assertTrue(c.m{j}({a}, {b}) >= 0);\n");
        }
    }
    if rng.gen_bool(0.25) {
        s += "    if (c.m0(1, 1) < 0) {\n        fail(\"negative\");\n    }\n";
    }
    s + "}\n"
}

fn killed_outcome(rng: &mut ChaCha8Rng) -> Outcome {
    match rng.gen_range(0..20) {
        0 => Outcome::TIME,
        1..=3 => Outcome::EXC,
        _ => Outcome::FAIL,
    }
}

pub fn generate_synthetic_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if !(0.0..0.5).contains(&cfg.noise_rate) {
        return Err(Error::InvalidParameter(format!(
            "noise_rate must be in [0, 0.5), got {}",
            cfg.noise_rate
        )));
    }
    if cfg.methods_per_class == 0 || cfg.tests_per_class == 0 || cfg.max_tests_per_mutant == 0 || cfg.max_hits == 0 {
        return Err(Error::InvalidParameter(
            "synthetic corpus sizes must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = SynthCorpus {
        corpus: Corpus::default(),
        sources: Vec::new(),
    };
    let mut next_test = 1u64;
    let mut k = 0usize;
    while out.corpus.mutants.len() < cfg.mutants {
        let name = format!("C{k}");
        let qualified = format!("{}.{name}", cfg.package);
        let mut w = ClassWriter {
            rng: &mut rng,
            lines: Vec::new(),
            sites: Vec::new(),
            helper: format!("combine{}", k % 4),
        };
        w.class(&cfg.package, &name, cfg.methods_per_class, cfg.statements_per_method);
        let (lines, sites) = (w.lines, w.sites);
        out.sources.push((
            format!("{}/{name}.java", cfg.package.replace('.', "/")),
            lines.join("\n") + "\n",
        ));

        let test_ids: Vec<u64> = (0..cfg.tests_per_class as u64).map(|t| next_test + t).collect();
        for (t, &id) in test_ids.iter().enumerate() {
            let method = format!("test{t}");
            out.corpus.tests.push(TestCaseRecord {
                test_id: id,
                qualified_name: format!("{qualified}Test#{method}"),
                source_text: test_source(&mut rng, &name, &method, cfg.methods_per_class),
            });
        }
        next_test += test_ids.len() as u64;

        for site in sites {
            for (op, before, after) in site.mutations {
                let id = out.corpus.mutants.len() as u64 + 1;
                let diff = statement_diff(&before, &after)?.to_json();
                let n = rng.gen_range(1..=cfg.max_tests_per_mutant.min(test_ids.len()));
                let mut covering: Vec<u64> = test_ids.choose_multiple(&mut rng, n).copied().collect();
                covering.sort_unstable();
                for t in covering {
                    let hits = rng.gen_range(1..=cfg.max_hits);
                    out.corpus.coverage.insert((id, t), hits);
                    let mut killed = cfg.rule.eval(op, &diff, hits);
                    if cfg.noise_rate > 0.0 && rng.gen_bool(cfg.noise_rate) {
                        killed = !killed;
                    }
                    if killed {
                        out.corpus.kills.insert((id, t), killed_outcome(&mut rng));
                    }
                }
                out.corpus.mutants.push(MutantRecord {
                    mutant_id: id,
                    operator: op,
                    class_name: qualified.clone(),
                    inside_method: site.method.is_some(),
                    method_signature: site.method.clone(),
                    line: site.line,
                    before,
                    after,
                });
            }
        }
        k += 1;
    }
    Ok(out)
}

/// Share of pairs whose outcome is a kill.
pub fn kill_rate(coverage: &CoverageMap, kills: &KillMap) -> f64 {
    if coverage.is_empty() {
        return 0.0;
    }
    kills.len() as f64 / coverage.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, noise: f64) -> SynthCorpus {
        generate_synthetic_corpus(&SynthConfig {
            mutants: 300,
            noise_rate: noise,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = small(7, 0.1);
        let b = small(7, 0.1);
        assert_eq!(a.sources, b.sources);
        assert_eq!(a.corpus.mutants, b.corpus.mutants);
        assert_eq!(a.corpus.coverage, b.corpus.coverage);
        assert_eq!(a.corpus.kills, b.corpus.kills);
        assert_ne!(small(8, 0.1).sources, a.sources);
    }

    #[test]
    fn noiseless_labels_follow_rule() {
        let s = small(1, 0.0);
        let rule = SynthConfig::default().rule;
        for m in &s.corpus.mutants {
            let diff = statement_diff(&m.before, &m.after).unwrap().to_json();
            for (&(mid, t), &hits) in s.corpus.coverage.range((m.mutant_id, 0)..=(m.mutant_id, u64::MAX)) {
                let killed = s.corpus.kills.contains_key(&(mid, t));
                assert_eq!(killed, rule.eval(m.operator, &diff, hits));
            }
        }
        let rate = kill_rate(&s.corpus.coverage, &s.corpus.kills);
        assert!(rate > 0.1 && rate < 0.9, "kill rate {rate}");
    }

    #[test]
    fn operator_rule() {
        let s = generate_synthetic_corpus(&SynthConfig {
            mutants: 200,
            rule: LabelRule::OperatorIn(vec![Operator::ROR]),
            ..SynthConfig::default()
        })
        .unwrap();
        for p in s.corpus.pairs().unwrap() {
            let op = s.corpus.mutants[p.mutant_id as usize - 1].operator;
            assert_eq!(p.outcome.is_killed(), op == Operator::ROR);
        }
    }

    #[test]
    fn rejects_half_noise() {
        let cfg = SynthConfig {
            noise_rate: 0.5,
            ..SynthConfig::default()
        };
        assert!(matches!(
            generate_synthetic_corpus(&cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn rule_json_shape() {
        let r: LabelRule = serde_json::from_str(r#"{"or":[{"operator_in":["ROR"]},{"hits_at_least":3}]}"#).unwrap();
        assert!(r.eval(Operator::AOR, "[]", 3));
        assert!(!r.eval(Operator::AOR, "[]", 2));
    }
}
