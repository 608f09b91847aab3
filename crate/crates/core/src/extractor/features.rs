//! Mutation-site resolution and the source-code feature group.

use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::lexer::{merge_angles, Token, TokenKind};
use super::parser::ParsedSource;

/// A statement-like location a mutant can sit on.
#[derive(Debug, Clone, Copy)]
pub enum SiteKind<'a> {
    Stmt(&'a Stmt),
    Field(&'a FieldDecl),
    EnumConstant(&'a EnumConstant),
}

#[derive(Debug, Clone)]
pub struct Site<'a> {
    pub kind: SiteKind<'a>,
    /// Innermost enclosing method or constructor.
    pub method: Option<&'a MethodDecl>,
    /// Enclosing conditional statements whose block contains the site.
    pub conditionals: Vec<&'a Stmt>,
    pub depth: usize,
    /// Token ranges owned by the site itself.
    pub own: Vec<Span>,
}

impl Site<'_> {
    pub fn contains_line(&self, line: u32) -> bool {
        self.own.iter().any(|s| s.contains_line(line))
    }

    fn line_extent(&self) -> u32 {
        self.own.iter().map(|s| s.line_count()).sum()
    }
}

pub fn is_compound(kind: &StmtKind) -> bool {
    matches!(
        kind,
        StmtKind::If { .. }
            | StmtKind::For { .. }
            | StmtKind::ForEach { .. }
            | StmtKind::While { .. }
            | StmtKind::DoWhile { .. }
            | StmtKind::Try { .. }
            | StmtKind::Switch { .. }
            | StmtKind::Synchronized { .. }
            | StmtKind::Labeled { .. }
            | StmtKind::Block(_)
    )
}

pub fn is_conditional(kind: &StmtKind) -> bool {
    matches!(
        kind,
        StmtKind::If { .. }
            | StmtKind::For { .. }
            | StmtKind::ForEach { .. }
            | StmtKind::While { .. }
            | StmtKind::DoWhile { .. }
            | StmtKind::Switch { .. }
    )
}

/// Collects every candidate site inside a type declaration.
pub struct SiteCollector<'a> {
    pub sites: Vec<Site<'a>>,
}

#[derive(Clone)]
struct Ctx<'a> {
    method: Option<&'a MethodDecl>,
    conds: Vec<&'a Stmt>,
    depth: usize,
}

impl<'a> SiteCollector<'a> {
    pub fn collect(t: &'a TypeDecl) -> Vec<Site<'a>> {
        let mut c = SiteCollector { sites: Vec::new() };
        c.type_decl(
            t,
            &Ctx {
                method: None,
                conds: Vec::new(),
                depth: 0,
            },
        );
        c.sites
    }

    fn type_decl(&mut self, t: &'a TypeDecl, ctx: &Ctx<'a>) {
        for ec in &t.enum_constants {
            self.sites.push(Site {
                kind: SiteKind::EnumConstant(ec),
                method: ctx.method,
                conditionals: ctx.conds.clone(),
                depth: ctx.depth,
                own: vec![ec.span],
            });
            for a in &ec.args {
                self.expr(a, ctx);
            }
            if let Some(body) = &ec.body {
                self.members(body, &self.nested(ctx));
            }
        }
        self.members(&t.members, ctx);
    }

    fn nested(&self, ctx: &Ctx<'a>) -> Ctx<'a> {
        Ctx {
            method: ctx.method,
            conds: ctx.conds.clone(),
            depth: ctx.depth + 1,
        }
    }

    fn members(&mut self, members: &'a [Member], ctx: &Ctx<'a>) {
        for m in members {
            match m {
                Member::Field(fd) => {
                    self.sites.push(Site {
                        kind: SiteKind::Field(fd),
                        method: ctx.method,
                        conditionals: ctx.conds.clone(),
                        depth: ctx.depth,
                        own: vec![fd.span],
                    });
                    for d in &fd.declarators {
                        if let Some(init) = &d.init {
                            self.expr(init, &self.nested(ctx));
                        }
                    }
                }
                Member::Method(md) => {
                    if let Some(b) = &md.body {
                        let inner = Ctx {
                            method: Some(md),
                            conds: Vec::new(),
                            depth: ctx.depth + 1,
                        };
                        self.block(b, &inner);
                    }
                }
                Member::Initializer { body, .. } => {
                    let inner = Ctx {
                        method: None,
                        conds: Vec::new(),
                        depth: ctx.depth + 1,
                    };
                    self.block(body, &inner);
                }
                Member::Type(t) => self.type_decl(t, &self.nested(ctx)),
            }
        }
    }

    fn block(&mut self, b: &'a Block, ctx: &Ctx<'a>) {
        for s in &b.stmts {
            self.stmt(s, ctx);
        }
    }

    fn push_stmt(&mut self, s: &'a Stmt, ctx: &Ctx<'a>) {
        let own = match &s.kind {
            StmtKind::DoWhile { trailer, .. } => vec![s.header, *trailer],
            StmtKind::Switch { cases, .. } => {
                let mut v = vec![s.header];
                v.extend(cases.iter().map(|c| c.label_span));
                v
            }
            k if is_compound(k) => vec![s.header],
            _ => vec![s.span],
        };
        self.sites.push(Site {
            kind: SiteKind::Stmt(s),
            method: ctx.method,
            conditionals: ctx.conds.clone(),
            depth: ctx.depth,
            own,
        });
    }

    fn stmt(&mut self, s: &'a Stmt, ctx: &Ctx<'a>) {
        if !matches!(s.kind, StmtKind::Block(_) | StmtKind::Labeled { .. } | StmtKind::Empty) {
            self.push_stmt(s, ctx);
        }
        let inner = self.nested(ctx);
        let mut in_cond = inner.clone();
        in_cond.conds.push(s);
        match &s.kind {
            StmtKind::LocalVar { declarators, .. } => {
                for d in declarators {
                    if let Some(init) = &d.init {
                        self.expr(init, &inner);
                    }
                }
            }
            StmtKind::If { cond, then, els } => {
                self.expr(cond, &inner);
                self.stmt(then, &in_cond);
                if let Some(e) = els {
                    self.stmt(e, &in_cond);
                }
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                for i in init {
                    if let StmtKind::Expr(e) = &i.kind {
                        self.expr(e, &inner);
                    }
                }
                if let Some(c) = cond {
                    self.expr(c, &inner);
                }
                for u in update {
                    self.expr(u, &inner);
                }
                self.stmt(body, &in_cond);
            }
            StmtKind::ForEach { iterable, body, .. } => {
                self.expr(iterable, &inner);
                self.stmt(body, &in_cond);
            }
            StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond, .. } => {
                self.expr(cond, &inner);
                self.stmt(body, &in_cond);
            }
            StmtKind::Try {
                resources,
                body,
                catches,
                finally,
            } => {
                for r in resources {
                    if let StmtKind::Expr(e) = &r.kind {
                        self.expr(e, &inner);
                    }
                }
                self.block(body, &inner);
                for c in catches {
                    self.block(&c.body, &inner);
                }
                if let Some(f) = finally {
                    self.block(f, &inner);
                }
            }
            StmtKind::Switch { selector, cases } => {
                self.expr(selector, &inner);
                for c in cases {
                    for st in &c.body {
                        self.stmt(st, &in_cond);
                    }
                }
            }
            StmtKind::Yield(e) | StmtKind::Throw(e) | StmtKind::Expr(e) => self.expr(e, &inner),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, &inner);
                }
            }
            StmtKind::Synchronized { lock, body } => {
                self.expr(lock, &inner);
                self.block(body, &inner);
            }
            StmtKind::Assert { cond, message } => {
                self.expr(cond, &inner);
                if let Some(m) = message {
                    self.expr(m, &inner);
                }
            }
            // Blocks and labels are transparent.
            StmtKind::Block(b) => self.block(b, ctx),
            StmtKind::Labeled { body, .. } => self.stmt(body, ctx),
            StmtKind::Break(_) | StmtKind::Continue(_) | StmtKind::Empty => {}
        }
    }

    /// Finds statement containers nested in expressions: lambda blocks,
    /// anonymous class bodies and switch expressions.
    fn expr(&mut self, e: &'a Expr, ctx: &Ctx<'a>) {
        struct Finder<'a> {
            lambdas: Vec<&'a Block>,
            anon: Vec<&'a [Member]>,
            switches: Vec<&'a [SwitchCase]>,
        }
        impl<'a> Visit<'a> for Finder<'a> {
            fn expr(&mut self, e: &'a Expr) {
                match &e.kind {
                    ExprKind::Lambda {
                        body: LambdaBody::Block(b),
                        ..
                    } => self.lambdas.push(b),
                    ExprKind::New { body: Some(m), .. } => self.anon.push(m),
                    ExprKind::Switch { cases, .. } => self.switches.push(cases),
                    _ => {}
                }
            }
            fn enter_nested_type(&mut self) -> bool {
                false
            }
        }
        // Only the outermost containers are needed; nested ones are reached
        // again through the recursive statement walk, so filter by stopping
        // at the first level.
        let mut f = Finder {
            lambdas: Vec::new(),
            anon: Vec::new(),
            switches: Vec::new(),
        };
        walk_expr_shallow(&mut f, e);
        let inner = self.nested(ctx);
        for b in f.lambdas {
            self.block(b, &inner);
        }
        for m in f.anon {
            self.members(m, &inner);
        }
        for cases in f.switches {
            for c in cases {
                for st in &c.body {
                    self.stmt(st, &inner);
                }
            }
        }
    }
}

/// Walks an expression tree without entering lambda blocks, anonymous
/// class bodies or switch-expression cases (their headers are visited).
fn walk_expr_shallow<'a>(v: &mut impl Visit<'a>, e: &'a Expr) {
    v.expr(e);
    match &e.kind {
        ExprKind::Lambda { body, .. } => {
            if let LambdaBody::Expr(x) = body {
                walk_expr_shallow(v, x);
            }
        }
        ExprKind::New { args, .. } | ExprKind::CtorCall { args, .. } => {
            for a in args {
                walk_expr_shallow(v, a);
            }
        }
        ExprKind::Switch { selector, .. } => walk_expr_shallow(v, selector),
        ExprKind::Literal(_) | ExprKind::Name(_) | ExprKind::This | ExprKind::Super | ExprKind::ClassLiteral(_) => {}
        ExprKind::FieldAccess { target, .. } | ExprKind::MethodRef { target, .. } => walk_expr_shallow(v, target),
        ExprKind::MethodCall { target, args, .. } => {
            if let Some(t) = target {
                walk_expr_shallow(v, t);
            }
            for a in args {
                walk_expr_shallow(v, a);
            }
        }
        ExprKind::NewArray { dims, init, .. } => {
            for d in dims.iter().chain(init.iter().flatten()) {
                walk_expr_shallow(v, d);
            }
        }
        ExprKind::ArrayInit(items) => {
            for i in items {
                walk_expr_shallow(v, i);
            }
        }
        ExprKind::Index { array, index } => {
            walk_expr_shallow(v, array);
            walk_expr_shallow(v, index);
        }
        ExprKind::Unary { operand, .. } => walk_expr_shallow(v, operand),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr_shallow(v, lhs);
            walk_expr_shallow(v, rhs);
        }
        ExprKind::Assign { target, value, .. } => {
            walk_expr_shallow(v, target);
            walk_expr_shallow(v, value);
        }
        ExprKind::Conditional { cond, then, els } => {
            walk_expr_shallow(v, cond);
            walk_expr_shallow(v, then);
            walk_expr_shallow(v, els);
        }
        ExprKind::Cast { expr, .. } | ExprKind::InstanceOf { expr, .. } | ExprKind::Paren(expr) => {
            walk_expr_shallow(v, expr)
        }
    }
}

/// Lexical tokens (angle operators merged) covered by the spans.
pub fn span_tokens(src: &ParsedSource, spans: &[Span]) -> Vec<Token> {
    let mut out = Vec::new();
    for s in spans {
        out.extend(merge_angles(src.tokens_of(*s)));
    }
    out
}

fn contains_run(hay: &[Token], needle: &[String]) -> bool {
    if needle.is_empty() {
        return false;
    }
    hay.windows(needle.len())
        .any(|w| w.iter().zip(needle).all(|(t, n)| t.text == *n))
}

/// Picks the site for a mutant line: sites owning the line, preferring
/// those whose tokens contain the before-fragment, then the innermost.
pub fn resolve_site<'a>(src: &ParsedSource, sites: &[Site<'a>], line: u32, before: &[String]) -> Option<Site<'a>> {
    let mut needle: &[String] = before;
    while needle.last().is_some_and(|t| t == ";") {
        needle = &needle[..needle.len() - 1];
    }
    sites
        .iter()
        .filter(|s| s.contains_line(line))
        .map(|s| {
            let matched = contains_run(&span_tokens(src, &s.own), needle);
            (matched, s)
        })
        .max_by(|(ma, a), (mb, b)| {
            ma.cmp(mb)
                .then(a.depth.cmp(&b.depth))
                .then(b.line_extent().cmp(&a.line_extent()))
                // Later sites on the same line are more deeply nested in source order.
                .then(a.own[0].lo.cmp(&b.own[0].lo))
        })
        .map(|(_, s)| s.clone())
}

pub fn statement_type(site: &Site<'_>) -> &'static str {
    match site.kind {
        SiteKind::Field(_) => "MemberDeclaration",
        SiteKind::EnumConstant(_) => "EnumConstant",
        SiteKind::Stmt(s) => match &s.kind {
            StmtKind::LocalVar { .. } => "LocalVariableDeclaration",
            StmtKind::If { .. } => "IF",
            StmtKind::For { .. } | StmtKind::ForEach { .. } => "FOR",
            StmtKind::While { .. } | StmtKind::DoWhile { .. } => "WHILE",
            StmtKind::Try { .. } => "TRY",
            StmtKind::Switch { .. } => "SWITCH",
            StmtKind::Yield(_) => "YIELD",
            StmtKind::Return(_) => "RETURN",
            StmtKind::Throw(_) => "THROW",
            StmtKind::Break(_) => "BREAK",
            StmtKind::Continue(_) => "CONTINUE",
            StmtKind::Synchronized { .. } => "SYNCHRONIZED",
            StmtKind::Assert { .. } => "ASSERT",
            StmtKind::Expr(e) => expression_statement_type(e),
            StmtKind::Block(_) | StmtKind::Labeled { .. } | StmtKind::Empty => "expression",
        },
    }
}

fn expression_statement_type(e: &Expr) -> &'static str {
    match &e.kind {
        ExprKind::Assign { op, .. } => match op.as_str() {
            "=" => "ASSIGN",
            "+=" => "ADD_ASSIGN",
            "-=" => "SUB_ASSIGN",
            "*=" => "MUL_ASSIGN",
            "/=" => "DIV_ASSIGN",
            "%=" => "MOD_ASSIGN",
            "&=" => "AND_ASSIGN",
            "|=" => "OR_ASSIGN",
            "^=" => "XOR_ASSIGN",
            "<<=" => "LSHIFT_ASSIGN",
            ">>=" => "RSHIFT_ASSIGN",
            ">>>=" => "URSHIFT_ASSIGN",
            _ => "expression",
        },
        ExprKind::Unary { op, .. } if op == "++" => "INC",
        ExprKind::Unary { op, .. } if op == "--" => "DEC",
        ExprKind::CtorCall { is_super: true, .. } => "methodCall-super",
        ExprKind::CtorCall { is_super: false, .. } => "methodCall-this",
        ExprKind::MethodCall { target, name, .. } => match target.as_deref().map(|t| &t.kind) {
            Some(ExprKind::Super) => "methodCall-super",
            Some(ExprKind::This) => "methodCall-this",
            _ if is_accessor(name, "set") => "methodCall-set",
            _ if is_accessor(name, "get") => "methodCall-get",
            _ => "methodCall",
        },
        _ => "expression",
    }
}

fn is_accessor(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| rest.chars().next().is_some_and(|c| c.is_uppercase() || c == '_'))
}

pub fn parent_context_type(site: &Site<'_>) -> &'static str {
    match site.method.map(|m| m.kind) {
        Some(MethodKind::Constructor) => "ConstructorDeclaration",
        Some(MethodKind::Method) => "MethodDeclaration",
        None => "Block",
    }
}

struct Mccabe(u32);

impl<'a> Visit<'a> for Mccabe {
    fn stmt(&mut self, s: &'a Stmt) {
        match &s.kind {
            StmtKind::If { .. }
            | StmtKind::For { .. }
            | StmtKind::ForEach { .. }
            | StmtKind::While { .. }
            | StmtKind::DoWhile { .. } => self.0 += 1,
            StmtKind::Try { catches, .. } => self.0 += catches.len() as u32,
            StmtKind::Switch { cases, .. } => self.0 += cases.iter().map(|c| c.labels.len() as u32).sum::<u32>(),
            _ => {}
        }
    }

    fn expr(&mut self, e: &'a Expr) {
        match &e.kind {
            ExprKind::Conditional { .. } => self.0 += 1,
            ExprKind::Binary { op, .. } if op == "&&" || op == "||" => self.0 += 1,
            ExprKind::Switch { cases, .. } => self.0 += cases.iter().map(|c| c.labels.len() as u32).sum::<u32>(),
            _ => {}
        }
    }

    fn enter_nested_type(&mut self) -> bool {
        false
    }
}

/// McCabe complexity: decision points + 1.
pub fn mccabe(md: &MethodDecl) -> u32 {
    let mut v = Mccabe(0);
    if let Some(b) = &md.body {
        walk_block(&mut v, b);
    }
    v.0 + 1
}

/// Token ranges of the block governed by a conditional statement.
pub fn conditional_block(s: &Stmt) -> Vec<Span> {
    match &s.kind {
        StmtKind::If { then, els, .. } => {
            let mut v = vec![then.span];
            if let Some(e) = els {
                v.push(e.span);
            }
            v
        }
        StmtKind::For { body, .. }
        | StmtKind::ForEach { body, .. }
        | StmtKind::While { body, .. }
        | StmtKind::DoWhile { body, .. } => {
            vec![body.span]
        }
        StmtKind::Switch { .. } => {
            let lo = s.header.hi;
            let hi = s.span.hi.saturating_sub(1).max(lo);
            vec![Span {
                lo,
                hi,
                start_line: s.header.end_line,
                end_line: s.span.end_line,
            }]
        }
        _ => Vec::new(),
    }
}

/// Distinct lines in the ranges holding a token other than a brace.
pub fn block_loc(src: &ParsedSource, ranges: &[Span]) -> u32 {
    let mut lines = BTreeSet::new();
    for r in ranges {
        for t in src.tokens_of(*r) {
            if t.text != "{" && t.text != "}" {
                lines.insert(t.line);
            }
        }
    }
    lines.len() as u32
}

fn block_children(s: &Stmt) -> Vec<&Stmt> {
    match &s.kind {
        StmtKind::If { then, els, .. } => {
            let mut v = vec![then.as_ref()];
            if let Some(e) = els {
                v.push(e);
            }
            v
        }
        StmtKind::For { body, .. }
        | StmtKind::ForEach { body, .. }
        | StmtKind::While { body, .. }
        | StmtKind::DoWhile { body, .. } => {
            vec![body.as_ref()]
        }
        StmtKind::Switch { cases, .. } => cases.iter().flat_map(|c| c.body.iter()).collect(),
        _ => Vec::new(),
    }
}

struct BlockScan<'a> {
    conditionals: u32,
    returns: bool,
    assigned: HashSet<&'a str>,
}

impl<'a> Visit<'a> for BlockScan<'a> {
    fn stmt(&mut self, s: &'a Stmt) {
        if is_conditional(&s.kind) {
            self.conditionals += 1;
        }
        match &s.kind {
            StmtKind::Return(_) | StmtKind::Throw(_) => self.returns = true,
            StmtKind::LocalVar { declarators, .. } => {
                for d in declarators.iter().filter(|d| d.init.is_some()) {
                    self.assigned.insert(&d.name);
                }
            }
            _ => {}
        }
    }

    fn expr(&mut self, e: &'a Expr) {
        let target = match &e.kind {
            ExprKind::Assign { target, .. } => Some(target.as_ref()),
            ExprKind::Unary { op, operand, .. } if op == "++" || op == "--" => Some(operand.as_ref()),
            _ => None,
        };
        if let Some(name) = target.and_then(variable_name) {
            self.assigned.insert(name);
        }
    }

    fn enter_nested_type(&mut self) -> bool {
        false
    }
}

/// `v` or `this.v`.
fn variable_name(e: &Expr) -> Option<&str> {
    match &e.kind {
        ExprKind::Name(n) => Some(n),
        ExprKind::FieldAccess { target, name } if matches!(target.kind, ExprKind::This) => Some(name),
        ExprKind::Paren(inner) => variable_name(inner),
        _ => None,
    }
}

/// Variables returned by `return v;` / `return this.v;` anywhere in the
/// class's own methods.
pub fn returned_variables(t: &TypeDecl) -> HashSet<&str> {
    struct R<'a>(HashSet<&'a str>);
    impl<'a> Visit<'a> for R<'a> {
        fn stmt(&mut self, s: &'a Stmt) {
            if let StmtKind::Return(Some(e)) = &s.kind {
                if let Some(n) = variable_name(e) {
                    self.0.insert(n);
                }
            }
        }
        fn enter_nested_type(&mut self) -> bool {
            false
        }
    }
    let mut r = R(HashSet::new());
    for m in &t.members {
        if let Member::Method(md) = m {
            if let Some(b) = &md.body {
                walk_block(&mut r, b);
            }
        }
    }
    r.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConditionalFeatures {
    pub block_loc: u32,
    pub block_count: u32,
    pub has_return_or_throw: bool,
    pub occurring_count: u32,
}

pub fn conditional_features(src: &ParsedSource, s: &Stmt, class_returns: &HashSet<&str>) -> ConditionalFeatures {
    if !is_conditional(&s.kind) {
        return ConditionalFeatures::default();
    }
    let ranges = conditional_block(s);
    let mut scan = BlockScan {
        conditionals: 0,
        returns: false,
        assigned: HashSet::new(),
    };
    for c in block_children(s) {
        walk_stmt(&mut scan, c);
    }
    let has_return_or_throw = scan.returns || scan.assigned.iter().any(|v| class_returns.contains(v));
    let vars = condition_variables(s);
    ConditionalFeatures {
        block_loc: block_loc(src, &ranges),
        block_count: scan.conditionals,
        has_return_or_throw,
        occurring_count: count_occurrences(src, &ranges, &vars),
    }
}

fn looks_like_variable(n: &str) -> bool {
    let mut chars = n.chars();
    match chars.next() {
        Some(c) if c.is_uppercase() => n.chars().all(|c| !c.is_lowercase()),
        Some(_) => true,
        None => false,
    }
}

/// Variable names read by a conditional statement's header.
pub fn condition_variables(s: &Stmt) -> BTreeSet<String> {
    struct Names(BTreeSet<String>);
    impl<'a> Visit<'a> for Names {
        fn expr(&mut self, e: &'a Expr) {
            if let Some(n) = variable_name(e) {
                if looks_like_variable(n) {
                    self.0.insert(n.to_string());
                }
            }
        }
        fn enter_nested_type(&mut self) -> bool {
            false
        }
    }
    let mut v = Names(BTreeSet::new());
    match &s.kind {
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => {
            walk_expr(&mut v, cond)
        }
        StmtKind::For { init, cond, update, .. } => {
            for i in init {
                match &i.kind {
                    StmtKind::LocalVar { declarators, .. } => {
                        for d in declarators {
                            v.0.insert(d.name.clone());
                        }
                    }
                    StmtKind::Expr(e) => walk_expr(&mut v, e),
                    _ => {}
                }
            }
            if let Some(c) = cond {
                walk_expr(&mut v, c);
            }
            for u in update {
                walk_expr(&mut v, u);
            }
        }
        StmtKind::ForEach { name, iterable, .. } => {
            v.0.insert(name.clone());
            walk_expr(&mut v, iterable);
        }
        StmtKind::Switch { selector, .. } => walk_expr(&mut v, selector),
        _ => {}
    }
    v.0
}

/// Occurrences of `vars` as plain or `this.`-qualified identifiers.
pub fn count_occurrences(src: &ParsedSource, ranges: &[Span], vars: &BTreeSet<String>) -> u32 {
    let mut n = 0;
    for r in ranges {
        let toks = src.tokens_of(*r);
        for (i, t) in toks.iter().enumerate() {
            if t.kind != TokenKind::Ident || !vars.contains(&t.text) {
                continue;
            }
            let after_dot = i > 0 && toks[i - 1].text == ".";
            let this_qualified = i > 1 && toks[i - 2].text == "this";
            let is_call = toks.get(i + 1).is_some_and(|n| n.text == "(");
            if (!after_dot || this_qualified) && !is_call {
                n += 1;
            }
        }
    }
    n
}

const NUMERIC_TYPES: &[&str] = &[
    "byte", "short", "int", "long", "float", "double", "Byte", "Short", "Integer", "Long", "Float", "Double",
];

pub const COLLECTION_TYPES: &[&str] = &[
    "Collection",
    "List",
    "Set",
    "Queue",
    "Deque",
    "SortedSet",
    "NavigableSet",
    "AbstractCollection",
    "AbstractList",
    "AbstractSequentialList",
    "AbstractSet",
    "AbstractQueue",
    "ArrayList",
    "LinkedList",
    "Vector",
    "Stack",
    "HashSet",
    "LinkedHashSet",
    "TreeSet",
    "EnumSet",
    "PriorityQueue",
    "ArrayDeque",
    "CopyOnWriteArrayList",
    "CopyOnWriteArraySet",
    "ConcurrentLinkedQueue",
    "ConcurrentLinkedDeque",
    "BlockingQueue",
    "LinkedBlockingQueue",
    "ArrayBlockingQueue",
    "PriorityBlockingQueue",
    "ConcurrentSkipListSet",
];

pub const MAP_TYPES: &[&str] = &[
    "Map",
    "SortedMap",
    "NavigableMap",
    "AbstractMap",
    "HashMap",
    "LinkedHashMap",
    "TreeMap",
    "Hashtable",
    "WeakHashMap",
    "IdentityHashMap",
    "EnumMap",
    "Properties",
    "ConcurrentMap",
    "ConcurrentHashMap",
    "ConcurrentNavigableMap",
    "ConcurrentSkipListMap",
];

/// Category of a declared type; `supertypes` maps a project type's simple
/// name to its direct supertypes' simple names.
pub fn type_category(ty: &TypeRef, supertypes: &dyn Fn(&str) -> Vec<String>) -> &'static str {
    let name = ty.simple_name();
    match name {
        n if NUMERIC_TYPES.contains(&n) => "NUMERIC",
        "char" | "Character" => "CHAR",
        "boolean" | "Boolean" => "BOOLEAN",
        "String" => "STRING",
        n => {
            let mut seen = HashSet::new();
            let mut stack = vec![n.to_string()];
            while let Some(cur) = stack.pop() {
                if !seen.insert(cur.clone()) {
                    continue;
                }
                if COLLECTION_TYPES.contains(&cur.as_str()) {
                    return "COLLECTION";
                }
                if MAP_TYPES.contains(&cur.as_str()) {
                    return "MAP";
                }
                stack.extend(supertypes(&cur));
            }
            "OBJECT"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Declaration {
    /// Empty when the site declares nothing.
    pub declared_type: String,
    pub final_or_new: bool,
}

pub fn declaration_features(site: &Site<'_>, supertypes: &dyn Fn(&str) -> Vec<String>) -> Declaration {
    let (modifiers, ty, declarators) = match site.kind {
        SiteKind::Field(f) => (&f.modifiers, &f.ty, &f.declarators),
        SiteKind::Stmt(Stmt {
            kind:
                StmtKind::LocalVar {
                    modifiers,
                    ty,
                    declarators,
                },
            ..
        }) => (modifiers, ty, declarators),
        _ => return Declaration::default(),
    };
    let first = declarators.first();
    let init = first.and_then(|d| d.init.as_ref());
    // `var` takes the type of a constructor call initializer.
    let effective = match (ty.name.as_str(), init.map(|e| &e.kind)) {
        ("var", Some(ExprKind::New { ty: t, .. })) => t.clone(),
        ("var", Some(ExprKind::NewArray { ty: t, .. })) => t.clone(),
        _ => ty.clone(),
    };
    let dims = effective.dims + first.map_or(0, |d| d.extra_dims);
    let base = if effective.name == "var" {
        "OBJECT"
    } else {
        type_category(&effective, supertypes)
    };
    let declared_type = if dims > 0 {
        format!("{base}_ARRAY")
    } else {
        base.to_string()
    };
    let is_new = declarators.iter().any(|d| {
        matches!(
            d.init.as_ref().map(|e| &e.kind),
            Some(ExprKind::New { .. } | ExprKind::NewArray { .. })
        )
    });
    Declaration {
        declared_type,
        final_or_new: modifiers.has("final") || is_new,
    }
}

/// Condition-like expression of a site for skeleton abstraction.
pub fn condition_expr<'a>(site: &Site<'a>) -> Option<&'a Expr> {
    match site.kind {
        SiteKind::Stmt(s) => match &s.kind {
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => Some(cond),
            StmtKind::For { cond, .. } => cond.as_ref(),
            StmtKind::ForEach { iterable, .. } => Some(iterable),
            StmtKind::Switch { selector, .. } => Some(selector),
            StmtKind::Return(e) => e.as_ref(),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::fragment_tokens;
    use super::super::parser::parse_source;
    use super::*;

    fn site_at<'a>(ps: &'a ParsedSource, line: u32, frag: &str) -> Site<'a> {
        let sites = SiteCollector::collect(&ps.unit.types[0]);
        resolve_site(ps, &sites, line, &fragment_tokens(frag).unwrap()).expect("site")
    }

    const SRC: &str = "package p;\n\
class C {\n\
    static int[] xs = {16, 2};\n\
    static { xs[0] = 1; }\n\
    private int v;\n\
    C(int v) {\n\
        this.init(v);\n\
    }\n\
    void init(int v) { this.v = v; }\n\
    int get() {\n\
        return v;\n\
    }\n\
    int loop(int n) {\n\
        int s = 0;\n\
        while (s < n) {\n\
            s += n;\n\
            if (s > 10) {\n\
                return s;\n\
            }\n\
        }\n\
        final HashMap<String, Integer> m = new HashMap<>();\n\
        return s > 0 ? s : -s;\n\
    }\n\
}\n";

    #[test]
    fn statement_types_and_parents() {
        let ps = parse_source(SRC).unwrap();
        let s = site_at(&ps, 3, "16");
        assert_eq!(statement_type(&s), "MemberDeclaration");
        assert_eq!(parent_context_type(&s), "Block");
        let s = site_at(&ps, 4, "1");
        assert_eq!(statement_type(&s), "ASSIGN");
        assert_eq!(parent_context_type(&s), "Block");
        let s = site_at(&ps, 7, "this.init(v)");
        assert_eq!(statement_type(&s), "methodCall-this");
        assert_eq!(parent_context_type(&s), "ConstructorDeclaration");
        let s = site_at(&ps, 15, "s < n");
        assert_eq!(statement_type(&s), "WHILE");
        let s = site_at(&ps, 16, "s += n");
        assert_eq!(statement_type(&s), "ADD_ASSIGN");
        assert_eq!(s.conditionals.len(), 1);
        let s = site_at(&ps, 18, "return s;");
        assert_eq!(s.conditionals.len(), 2);
    }

    #[test]
    fn while_block_features() {
        let ps = parse_source(SRC).unwrap();
        let s = site_at(&ps, 15, "s < n");
        let SiteKind::Stmt(st) = s.kind else { panic!() };
        let cls = returned_variables(&ps.unit.types[0]);
        let f = conditional_features(&ps, st, &cls);
        assert_eq!(f.block_loc, 3);
        assert_eq!(f.block_count, 1);
        assert!(f.has_return_or_throw);
        // s and n on line 16, then s in the nested condition and return.
        assert_eq!(f.occurring_count, 4);
    }

    #[test]
    fn assignment_returned_elsewhere_counts_as_return() {
        let src = "class C { int v; void set(int x) { if (x > 0) { v = x; } } int v() { return v; } }";
        let ps = parse_source(src).unwrap();
        let s = site_at(&ps, 1, "x > 0");
        let SiteKind::Stmt(st) = s.kind else { panic!() };
        let f = conditional_features(&ps, st, &returned_variables(&ps.unit.types[0]));
        assert!(f.has_return_or_throw);
    }

    #[test]
    fn declarations() {
        let ps = parse_source(SRC).unwrap();
        let none = |_: &str| Vec::new();
        let s = site_at(&ps, 21, "new HashMap<>()");
        let d = declaration_features(&s, &none);
        assert_eq!(d.declared_type, "MAP");
        assert!(d.final_or_new);
        let s = site_at(&ps, 3, "16");
        assert_eq!(declaration_features(&s, &none).declared_type, "NUMERIC_ARRAY");
        let s = site_at(&ps, 14, "0");
        let d = declaration_features(&s, &none);
        assert_eq!((d.declared_type.as_str(), d.final_or_new), ("NUMERIC", false));
    }

    #[test]
    fn project_subtypes_resolve_transitively() {
        let sup = |n: &str| match n {
            "Bag" => vec!["Base".to_string()],
            "Base" => vec!["ArrayList".to_string()],
            _ => Vec::new(),
        };
        let ty = TypeRef {
            name: "Bag".into(),
            args: Vec::new(),
            dims: 0,
        };
        assert_eq!(type_category(&ty, &sup), "COLLECTION");
    }

    #[test]
    fn mccabe_counts_decisions() {
        let ps = parse_source(SRC).unwrap();
        let mut cx = Vec::new();
        for t in &ps.unit.types {
            super::super::callgraph::for_each_method(t, &mut |md, _, _| cx.push((md.name.clone(), mccabe(md))));
        }
        assert!(cx.contains(&("get".to_string(), 1)));
        // while + if + ?:
        assert!(cx.contains(&("loop".to_string(), 4)));
    }
}
