//! Syntax tree for the supported Java subset.

/// Token range `[lo, hi)` plus the source lines it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn contains_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn line_count(&self) -> u32 {
        self.end_line - self.start_line + 1
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompilationUnit {
    pub package: Option<String>,
    pub imports: Vec<String>,
    pub types: Vec<TypeDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Annotation,
}

#[derive(Debug, Clone)]
pub struct TypeDecl {
    pub kind: TypeKind,
    pub name: String,
    pub extends: Vec<TypeRef>,
    pub implements: Vec<TypeRef>,
    pub enum_constants: Vec<EnumConstant>,
    pub members: Vec<Member>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct EnumConstant {
    pub name: String,
    pub args: Vec<Expr>,
    pub body: Option<Vec<Member>>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum Member {
    Field(FieldDecl),
    Method(MethodDecl),
    Initializer { is_static: bool, body: Block },
    Type(TypeDecl),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Modifiers {
    pub words: Vec<String>,
}

impl Modifiers {
    pub fn has(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }
}

#[derive(Debug, Clone)]
pub struct FieldDecl {
    pub modifiers: Modifiers,
    pub ty: TypeRef,
    pub declarators: Vec<VarDeclarator>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct VarDeclarator {
    pub name: String,
    pub extra_dims: u32,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Method,
    Constructor,
}

#[derive(Debug, Clone)]
pub struct MethodDecl {
    pub kind: MethodKind,
    pub modifiers: Modifiers,
    pub name: String,
    pub params: Vec<Param>,
    pub throws: Vec<TypeRef>,
    pub body: Option<Block>,
    /// From the first modifier (annotations excluded) to the closing brace.
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub ty: TypeRef,
    pub name: String,
    pub varargs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeRef {
    /// Dotted name without type arguments, e.g. `java.util.Map` or `int`.
    pub name: String,
    pub args: Vec<TypeRef>,
    pub dims: u32,
}

impl TypeRef {
    pub fn simple_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    /// The part of the statement owned by the statement itself: the whole
    /// statement for simple statements, the keyword and parenthesized
    /// header for compound ones.
    pub header: Span,
}

#[derive(Debug, Clone)]
pub struct CatchClause {
    pub types: Vec<TypeRef>,
    pub name: String,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct SwitchCase {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub body: Vec<Stmt>,
    /// The `case ...:` / `case ... ->` label itself.
    pub label_span: Span,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    LocalVar {
        modifiers: Modifiers,
        ty: TypeRef,
        declarators: Vec<VarDeclarator>,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    For {
        init: Vec<Stmt>,
        cond: Option<Expr>,
        update: Vec<Expr>,
        body: Box<Stmt>,
    },
    ForEach {
        modifiers: Modifiers,
        ty: TypeRef,
        name: String,
        iterable: Expr,
        body: Box<Stmt>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
        /// `while (cond);` trailer.
        trailer: Span,
    },
    Try {
        resources: Vec<Stmt>,
        body: Block,
        catches: Vec<CatchClause>,
        finally: Option<Block>,
    },
    Switch {
        selector: Expr,
        cases: Vec<SwitchCase>,
    },
    Yield(Expr),
    Return(Option<Expr>),
    Throw(Expr),
    Break(Option<String>),
    Continue(Option<String>),
    Synchronized {
        lock: Expr,
        body: Block,
    },
    Assert {
        cond: Expr,
        message: Option<Expr>,
    },
    Expr(Expr),
    Block(Block),
    Labeled {
        label: String,
        body: Box<Stmt>,
    },
    Empty,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum LambdaBody {
    Expr(Box<Expr>),
    Block(Block),
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Literal(String),
    Name(String),
    This,
    Super,
    FieldAccess {
        target: Box<Expr>,
        name: String,
    },
    MethodCall {
        target: Option<Box<Expr>>,
        name: String,
        args: Vec<Expr>,
    },
    /// `this(...)` / `super(...)` constructor invocations.
    CtorCall {
        is_super: bool,
        args: Vec<Expr>,
    },
    New {
        ty: TypeRef,
        args: Vec<Expr>,
        body: Option<Vec<Member>>,
    },
    NewArray {
        ty: TypeRef,
        dims: Vec<Expr>,
        init: Option<Vec<Expr>>,
    },
    ArrayInit(Vec<Expr>),
    Index {
        array: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: String,
        operand: Box<Expr>,
        postfix: bool,
    },
    Binary {
        op: String,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Assign {
        op: String,
        target: Box<Expr>,
        value: Box<Expr>,
    },
    Conditional {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Cast {
        ty: TypeRef,
        expr: Box<Expr>,
    },
    InstanceOf {
        expr: Box<Expr>,
        ty: TypeRef,
        binding: Option<String>,
    },
    Lambda {
        params: Vec<String>,
        body: LambdaBody,
    },
    MethodRef {
        target: Box<Expr>,
        name: String,
    },
    ClassLiteral(TypeRef),
    Paren(Box<Expr>),
    Switch {
        selector: Box<Expr>,
        cases: Vec<SwitchCase>,
    },
}

/// Visitor-style walk over every nested expression, statement and member.
pub trait Visit<'a> {
    fn expr(&mut self, _e: &'a Expr) {}
    fn stmt(&mut self, _s: &'a Stmt) {}
    /// Return false to skip the body of a nested type (anonymous or local).
    fn enter_nested_type(&mut self) -> bool {
        true
    }
}

pub fn walk_block<'a>(v: &mut impl Visit<'a>, b: &'a Block) {
    for s in &b.stmts {
        walk_stmt(v, s);
    }
}

pub fn walk_stmt<'a>(v: &mut impl Visit<'a>, s: &'a Stmt) {
    v.stmt(s);
    match &s.kind {
        StmtKind::LocalVar { declarators, .. } => {
            for d in declarators {
                if let Some(init) = &d.init {
                    walk_expr(v, init);
                }
            }
        }
        StmtKind::If { cond, then, els } => {
            walk_expr(v, cond);
            walk_stmt(v, then);
            if let Some(e) = els {
                walk_stmt(v, e);
            }
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            for s in init {
                walk_stmt(v, s);
            }
            if let Some(c) = cond {
                walk_expr(v, c);
            }
            for u in update {
                walk_expr(v, u);
            }
            walk_stmt(v, body);
        }
        StmtKind::ForEach { iterable, body, .. } => {
            walk_expr(v, iterable);
            walk_stmt(v, body);
        }
        StmtKind::While { cond, body } => {
            walk_expr(v, cond);
            walk_stmt(v, body);
        }
        StmtKind::DoWhile { body, cond, .. } => {
            walk_stmt(v, body);
            walk_expr(v, cond);
        }
        StmtKind::Try {
            resources,
            body,
            catches,
            finally,
        } => {
            for r in resources {
                walk_stmt(v, r);
            }
            walk_block(v, body);
            for c in catches {
                walk_block(v, &c.body);
            }
            if let Some(f) = finally {
                walk_block(v, f);
            }
        }
        StmtKind::Switch { selector, cases } => {
            walk_expr(v, selector);
            walk_cases(v, cases);
        }
        StmtKind::Yield(e) | StmtKind::Throw(e) | StmtKind::Expr(e) => walk_expr(v, e),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                walk_expr(v, e);
            }
        }
        StmtKind::Synchronized { lock, body } => {
            walk_expr(v, lock);
            walk_block(v, body);
        }
        StmtKind::Assert { cond, message } => {
            walk_expr(v, cond);
            if let Some(m) = message {
                walk_expr(v, m);
            }
        }
        StmtKind::Block(b) => walk_block(v, b),
        StmtKind::Labeled { body, .. } => walk_stmt(v, body),
        StmtKind::Break(_) | StmtKind::Continue(_) | StmtKind::Empty => {}
    }
}

fn walk_cases<'a>(v: &mut impl Visit<'a>, cases: &'a [SwitchCase]) {
    for c in cases {
        for l in &c.labels {
            walk_expr(v, l);
        }
        for s in &c.body {
            walk_stmt(v, s);
        }
    }
}

pub fn walk_members<'a>(v: &mut impl Visit<'a>, members: &'a [Member]) {
    for m in members {
        match m {
            Member::Field(f) => {
                for d in &f.declarators {
                    if let Some(init) = &d.init {
                        walk_expr(v, init);
                    }
                }
            }
            Member::Method(md) => {
                if let Some(b) = &md.body {
                    walk_block(v, b);
                }
            }
            Member::Initializer { body, .. } => walk_block(v, body),
            Member::Type(t) => {
                if v.enter_nested_type() {
                    walk_type(v, t);
                }
            }
        }
    }
}

pub fn walk_type<'a>(v: &mut impl Visit<'a>, t: &'a TypeDecl) {
    for c in &t.enum_constants {
        for a in &c.args {
            walk_expr(v, a);
        }
        if let Some(body) = &c.body {
            if v.enter_nested_type() {
                walk_members(v, body);
            }
        }
    }
    walk_members(v, &t.members);
}

pub fn walk_expr<'a>(v: &mut impl Visit<'a>, e: &'a Expr) {
    v.expr(e);
    match &e.kind {
        ExprKind::Literal(_) | ExprKind::Name(_) | ExprKind::This | ExprKind::Super | ExprKind::ClassLiteral(_) => {}
        ExprKind::FieldAccess { target, .. } | ExprKind::MethodRef { target, .. } => walk_expr(v, target),
        ExprKind::MethodCall { target, args, .. } => {
            if let Some(t) = target {
                walk_expr(v, t);
            }
            for a in args {
                walk_expr(v, a);
            }
        }
        ExprKind::CtorCall { args, .. } => {
            for a in args {
                walk_expr(v, a);
            }
        }
        ExprKind::New { args, body, .. } => {
            for a in args {
                walk_expr(v, a);
            }
            if let Some(members) = body {
                if v.enter_nested_type() {
                    walk_members(v, members);
                }
            }
        }
        ExprKind::NewArray { dims, init, .. } => {
            for d in dims {
                walk_expr(v, d);
            }
            for i in init.iter().flatten() {
                walk_expr(v, i);
            }
        }
        ExprKind::ArrayInit(items) => {
            for i in items {
                walk_expr(v, i);
            }
        }
        ExprKind::Index { array, index } => {
            walk_expr(v, array);
            walk_expr(v, index);
        }
        ExprKind::Unary { operand, .. } => walk_expr(v, operand),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(v, lhs);
            walk_expr(v, rhs);
        }
        ExprKind::Assign { target, value, .. } => {
            walk_expr(v, target);
            walk_expr(v, value);
        }
        ExprKind::Conditional { cond, then, els } => {
            walk_expr(v, cond);
            walk_expr(v, then);
            walk_expr(v, els);
        }
        ExprKind::Cast { expr, .. } | ExprKind::InstanceOf { expr, .. } | ExprKind::Paren(expr) => walk_expr(v, expr),
        ExprKind::Lambda { body, .. } => match body {
            LambdaBody::Expr(e) => walk_expr(v, e),
            LambdaBody::Block(b) => walk_block(v, b),
        },
        ExprKind::Switch { selector, cases } => {
            walk_expr(v, selector);
            walk_cases(v, cases);
        }
    }
}
