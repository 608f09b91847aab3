//! Static call graph resolved by method name and argument count.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::parser::ParsedSource;

/// A method or constructor: its file and first token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId {
    pub file: usize,
    pub start: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    callees: HashMap<MethodId, BTreeSet<MethodId>>,
    callers: HashMap<MethodId, BTreeSet<MethodId>>,
}

/// Invokes `f(method, class, superclass)` for every method and constructor
/// declared in `t`, including nested, anonymous and enum-constant bodies.
pub fn for_each_method<'a>(t: &'a TypeDecl, f: &mut dyn FnMut(&'a MethodDecl, &'a str, Option<&'a str>)) {
    for c in &t.enum_constants {
        for a in &c.args {
            anonymous_in_expr(a, f);
        }
        if let Some(body) = &c.body {
            members_methods(body, "", Some(&t.name), f);
        }
    }
    let sup = t
        .extends
        .first()
        .filter(|_| t.kind == TypeKind::Class)
        .map(|s| s.simple_name());
    members_methods(&t.members, &t.name, sup, f);
}

fn members_methods<'a>(
    members: &'a [Member],
    class: &'a str,
    sup: Option<&'a str>,
    f: &mut dyn FnMut(&'a MethodDecl, &'a str, Option<&'a str>),
) {
    for m in members {
        match m {
            Member::Method(md) => {
                f(md, class, sup);
                if let Some(b) = &md.body {
                    let mut finder = AnonFinder::default();
                    walk_block(&mut finder, b);
                    finder.emit(f);
                }
            }
            Member::Field(fd) => {
                for d in &fd.declarators {
                    if let Some(init) = &d.init {
                        anonymous_in_expr(init, f);
                    }
                }
            }
            Member::Initializer { body, .. } => {
                let mut finder = AnonFinder::default();
                walk_block(&mut finder, body);
                finder.emit(f);
            }
            Member::Type(t) => for_each_method(t, f),
        }
    }
}

fn anonymous_in_expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a MethodDecl, &'a str, Option<&'a str>)) {
    let mut finder = AnonFinder::default();
    walk_expr(&mut finder, e);
    finder.emit(f);
}

/// Collects anonymous class bodies without descending into them.
#[derive(Default)]
struct AnonFinder<'a> {
    bodies: Vec<(&'a str, &'a [Member])>,
}

impl<'a> AnonFinder<'a> {
    fn emit(self, f: &mut dyn FnMut(&'a MethodDecl, &'a str, Option<&'a str>)) {
        for (base, body) in self.bodies {
            members_methods(body, "", Some(base), f);
        }
    }
}

impl<'a> Visit<'a> for AnonFinder<'a> {
    fn expr(&mut self, e: &'a Expr) {
        if let ExprKind::New {
            ty, body: Some(body), ..
        } = &e.kind
        {
            self.bodies.push((ty.simple_name(), body));
        }
    }

    fn enter_nested_type(&mut self) -> bool {
        false
    }
}

#[derive(Default)]
struct Index {
    by_name: HashMap<(String, usize), Vec<MethodId>>,
    ctors: HashMap<(String, usize), Vec<MethodId>>,
    varargs: Vec<(String, usize, MethodId)>,
    varargs_ctors: Vec<(String, usize, MethodId)>,
}

impl Index {
    fn add(&mut self, md: &MethodDecl, class: &str, id: MethodId) {
        let n = md.params.len();
        let varargs = md.params.last().is_some_and(|p| p.varargs);
        match md.kind {
            MethodKind::Method => {
                if varargs {
                    self.varargs.push((md.name.clone(), n - 1, id));
                } else {
                    self.by_name.entry((md.name.clone(), n)).or_default().push(id);
                }
            }
            MethodKind::Constructor => {
                if varargs {
                    self.varargs_ctors.push((class.to_string(), n - 1, id));
                } else {
                    self.ctors.entry((class.to_string(), n)).or_default().push(id);
                }
            }
        }
    }

    fn resolve(&self, ctor: bool, name: &str, arity: usize, out: &mut BTreeSet<MethodId>) {
        let (exact, var) = if ctor {
            (&self.ctors, &self.varargs_ctors)
        } else {
            (&self.by_name, &self.varargs)
        };
        if let Some(ids) = exact.get(&(name.to_string(), arity)) {
            out.extend(ids.iter().copied());
        }
        out.extend(
            var.iter()
                .filter(|(n, min, _)| n == name && arity >= *min)
                .map(|(_, _, id)| *id),
        );
    }
}

struct CallSites<'a> {
    index: &'a Index,
    class: &'a str,
    sup: Option<&'a str>,
    out: BTreeSet<MethodId>,
}

impl<'a, 'b> Visit<'b> for CallSites<'a> {
    fn expr(&mut self, e: &'b Expr) {
        match &e.kind {
            ExprKind::MethodCall { name, args, .. } => self.index.resolve(false, name, args.len(), &mut self.out),
            ExprKind::New { ty, args, .. } => self.index.resolve(true, ty.simple_name(), args.len(), &mut self.out),
            ExprKind::CtorCall { is_super, args } => {
                let target = if *is_super { self.sup } else { Some(self.class) };
                if let Some(t) = target.filter(|t| !t.is_empty()) {
                    self.index.resolve(true, t, args.len(), &mut self.out);
                }
            }
            _ => {}
        }
    }

    fn enter_nested_type(&mut self) -> bool {
        false
    }
}

impl CallGraph {
    pub fn build(files: &[ParsedSource]) -> CallGraph {
        let mut index = Index::default();
        let mut methods: Vec<(MethodId, &MethodDecl, &str, Option<&str>)> = Vec::new();
        for (fi, file) in files.iter().enumerate() {
            for t in &file.unit.types {
                for_each_method(t, &mut |md, class, sup| {
                    let id = MethodId {
                        file: fi,
                        start: md.span.lo,
                    };
                    methods.push((id, md, class, sup));
                });
            }
        }
        for &(id, md, class, _) in &methods {
            index.add(md, class, id);
        }
        let mut graph = CallGraph::default();
        for &(id, md, class, sup) in &methods {
            let Some(body) = &md.body else { continue };
            let mut sites = CallSites {
                index: &index,
                class,
                sup,
                out: BTreeSet::new(),
            };
            walk_block(&mut sites, body);
            for &callee in &sites.out {
                graph.callers.entry(callee).or_default().insert(id);
            }
            graph.callees.insert(id, sites.out);
        }
        graph
    }

    /// Distinct project methods called by `id`.
    pub fn call(&self, id: MethodId) -> u32 {
        self.callees.get(&id).map_or(0, |s| s.len() as u32)
    }

    /// Distinct project methods calling `id`.
    pub fn callby(&self, id: MethodId) -> u32 {
        self.callers.get(&id).map_or(0, |s| s.len() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_source;
    use super::*;

    fn ids_by_name(ps: &ParsedSource) -> HashMap<String, MethodId> {
        let mut out = HashMap::new();
        for t in &ps.unit.types {
            for_each_method(t, &mut |md, _, _| {
                out.insert(
                    md.name.clone(),
                    MethodId {
                        file: 0,
                        start: md.span.lo,
                    },
                );
            });
        }
        out
    }

    #[test]
    fn distinct_callees_and_callers() {
        let src = "class C {\n\
            void m() { a(); a(); b(1); }\n\
            void a() {}\n\
            void b(int x) { a(); }\n\
            void b(int x, int y) {}\n\
            void unused() { missing(); }\n\
        }";
        let ps = parse_source(src).unwrap();
        let g = CallGraph::build(std::slice::from_ref(&ps));
        let ids = ids_by_name(&ps);
        assert_eq!(g.call(ids["m"]), 2);
        assert_eq!(g.callby(ids["a"]), 2);
        assert_eq!(g.callby(ids["m"]), 0);
        assert_eq!(g.call(ids["unused"]), 0);
    }

    #[test]
    fn constructors_and_varargs() {
        let src = "class C extends B {\n\
            C() { this(1); }\n\
            C(int x) { super(); log(\"a\", 1, 2); }\n\
            static C make() { return new C(); }\n\
            void log(String f, Object... args) {}\n\
        }\n\
        class B { B() {} }";
        let ps = parse_source(src).unwrap();
        let g = CallGraph::build(std::slice::from_ref(&ps));
        let ids = ids_by_name(&ps);
        assert_eq!(g.call(ids["make"]), 1);
        assert_eq!(g.callby(ids["log"]), 1);
        assert_eq!(g.callby(ids["B"]), 1);
    }
}
