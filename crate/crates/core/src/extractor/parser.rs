//! Recursive-descent parser for the Java subset used by feature extraction.
//!
//! Covers class, interface, enum and annotation declarations with fields,
//! methods, constructors and initializer blocks, every statement form of
//! the statement taxonomy, and the full expression grammar including
//! lambdas, method references, switch expressions and anonymous classes.
//! Local type declarations, records, modules and type patterns in `case`
//! labels are rejected with [`Error::Unsupported`].

use super::ast::*;
use super::lexer::{angle_operator, tokenize, Token, TokenKind};
use crate::error::{Error, Result};

/// A parsed file: source text, token stream and tree.
#[derive(Debug, Clone)]
pub struct ParsedSource {
    pub text: String,
    pub tokens: Vec<Token>,
    pub unit: CompilationUnit,
}

impl ParsedSource {
    /// Source text covered by a span.
    pub fn text_of(&self, span: Span) -> &str {
        if span.hi <= span.lo {
            return "";
        }
        let start = self.tokens[span.lo].start;
        let end = self.tokens[span.hi - 1].end;
        &self.text[start..end]
    }

    pub fn tokens_of(&self, span: Span) -> &[Token] {
        &self.tokens[span.lo..span.hi.max(span.lo)]
    }
}

pub fn parse_source(text: &str) -> Result<ParsedSource> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let unit = p.compilation_unit()?;
    Ok(ParsedSource {
        text: text.to_string(),
        tokens: p.tokens,
        unit,
    })
}

/// Parses a sequence of class-body declarations (e.g. a single test method)
/// and wraps them in an anonymous top-level class.
pub fn parse_members(text: &str) -> Result<ParsedSource> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let start = p.pos;
    let mut members = Vec::new();
    while !p.at_eof() {
        if p.eat(";") {
            continue;
        }
        members.push(p.member(false)?);
    }
    let span = p.span_from(start);
    Ok(ParsedSource {
        text: text.to_string(),
        tokens: p.tokens,
        unit: CompilationUnit {
            package: None,
            imports: Vec::new(),
            types: vec![TypeDecl {
                kind: TypeKind::Class,
                name: String::new(),
                extends: Vec::new(),
                implements: Vec::new(),
                enum_constants: Vec::new(),
                members,
                span,
            }],
        },
    })
}

const MODIFIERS: &[&str] = &[
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "native",
    "synchronized",
    "transient",
    "volatile",
    "strictfp",
    "default",
];

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double", "void",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<="];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    // ----- token helpers -------------------------------------------------

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)]
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is(text)
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = self.peek();
        Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn unsupported(&self, construct: &str) -> Error {
        Error::Unsupported {
            construct: construct.to_string(),
            line: self.peek().line,
        }
    }

    fn expect(&mut self, text: &str) -> Result<Token> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            let found = if self.at_eof() {
                "end of input".to_string()
            } else {
                format!("`{}`", self.peek().text)
            };
            Err(self.error(format!("expected `{text}`, found {found}")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        if self.peek().is_ident() {
            Ok(self.bump().text)
        } else {
            Err(self.error(format!("expected identifier, found `{}`", self.peek().text)))
        }
    }

    fn at_ident(&self, text: &str) -> bool {
        let t = self.peek();
        t.is_ident() && t.text == text
    }

    fn span_from(&self, lo: usize) -> Span {
        let hi = self.pos.max(lo);
        let start_line = self.tokens[lo.min(self.tokens.len() - 1)].line;
        let end_line = if hi > lo { self.tokens[hi - 1].line } else { start_line };
        Span {
            lo,
            hi,
            start_line,
            end_line,
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> Result<()> {
        self.expect(open)?;
        let mut depth = 1usize;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.error(format!("unbalanced `{open}`")));
            }
            let t = self.bump();
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    // ----- declarations ------------------------------------------------------

    fn compilation_unit(&mut self) -> Result<CompilationUnit> {
        let mut unit = CompilationUnit::default();
        let save = self.pos;
        self.skip_annotations()?;
        if self.eat("package") {
            unit.package = Some(self.qualified_name()?);
            self.expect(";")?;
        } else {
            self.pos = save;
        }
        while self.at("import") {
            self.bump();
            let is_static = self.eat("static");
            let mut name = self.qualified_name()?;
            if self.eat(".") {
                self.expect("*")?;
                name.push_str(".*");
            }
            self.expect(";")?;
            unit.imports
                .push(if is_static { format!("static {name}") } else { name });
        }
        while !self.at_eof() {
            if self.eat(";") {
                continue;
            }
            if self.at_ident("module") || self.at_ident("open") {
                return Err(self.unsupported("module declaration"));
            }
            let start = self.pos;
            let modifiers = self.modifiers()?;
            unit.types.push(self.type_decl(start, modifiers)?);
        }
        Ok(unit)
    }

    fn qualified_name(&mut self) -> Result<String> {
        let mut name = self.ident()?;
        while self.at(".") && self.peek_at(1).is_ident() {
            self.bump();
            name.push('.');
            name.push_str(&self.ident()?);
        }
        Ok(name)
    }

    fn skip_annotations(&mut self) -> Result<()> {
        while self.at("@") && !self.peek_at(1).is("interface") {
            self.bump();
            self.qualified_name()?;
            if self.at("(") {
                self.skip_balanced("(", ")")?;
            }
        }
        Ok(())
    }

    fn modifiers(&mut self) -> Result<Modifiers> {
        let mut m = Modifiers::default();
        loop {
            if self.at("@") && !self.peek_at(1).is("interface") {
                self.skip_annotations()?;
            } else if MODIFIERS.iter().any(|w| self.at(w))
                && !(self.at("default") && (self.peek_at(1).is(":") || self.peek_at(1).is("->")))
            {
                // `synchronized (` is a statement, never reached from member context.
                m.words.push(self.bump().text);
            } else if self.at_ident("sealed")
                && (self.peek_at(1).is_ident() || self.peek_at(1).kind == TokenKind::Keyword)
            {
                m.words.push(self.bump().text);
            } else if self.at_ident("non") && self.peek_at(1).is("-") && self.peek_at(2).text == "sealed" {
                self.bump();
                self.bump();
                self.bump();
                m.words.push("non-sealed".into());
            } else {
                return Ok(m);
            }
        }
    }

    fn at_type_decl_keyword(&self) -> bool {
        self.at("class") || self.at("interface") || self.at("enum") || (self.at("@") && self.peek_at(1).is("interface"))
    }

    fn type_decl(&mut self, start: usize, _modifiers: Modifiers) -> Result<TypeDecl> {
        if self.at_ident("record") && self.peek_at(1).is_ident() {
            return Err(self.unsupported("record declaration"));
        }
        let kind = if self.eat("class") {
            TypeKind::Class
        } else if self.eat("interface") {
            TypeKind::Interface
        } else if self.eat("enum") {
            TypeKind::Enum
        } else if self.at("@") && self.peek_at(1).is("interface") {
            self.bump();
            self.bump();
            TypeKind::Annotation
        } else {
            return Err(self.error(format!("expected type declaration, found `{}`", self.peek().text)));
        };
        let name = self.ident()?;
        if self.at("<") {
            self.type_params()?;
        }
        let mut extends = Vec::new();
        let mut implements = Vec::new();
        loop {
            if self.eat("extends") {
                extends = self.type_list()?;
            } else if self.eat("implements") {
                implements = self.type_list()?;
            } else if self.at_ident("permits") {
                self.bump();
                self.type_list()?;
            } else {
                break;
            }
        }
        self.expect("{")?;
        let mut enum_constants = Vec::new();
        if kind == TypeKind::Enum {
            enum_constants = self.enum_constants()?;
        }
        let mut members = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unterminated type body"));
            }
            if self.eat(";") {
                continue;
            }
            members.push(self.member(kind == TypeKind::Annotation)?);
        }
        self.expect("}")?;
        Ok(TypeDecl {
            kind,
            name,
            extends,
            implements,
            enum_constants,
            members,
            span: self.span_from(start),
        })
    }

    fn type_list(&mut self) -> Result<Vec<TypeRef>> {
        let mut out = vec![self.parse_type()?];
        while self.eat(",") {
            out.push(self.parse_type()?);
        }
        Ok(out)
    }

    fn type_params(&mut self) -> Result<()> {
        self.expect("<")?;
        loop {
            self.skip_annotations()?;
            self.ident()?;
            if self.eat("extends") {
                self.parse_type()?;
                while self.eat("&") {
                    self.parse_type()?;
                }
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(">")?;
        Ok(())
    }

    fn enum_constants(&mut self) -> Result<Vec<EnumConstant>> {
        let mut out = Vec::new();
        loop {
            self.skip_annotations()?;
            if self.at(";") || self.at("}") {
                break;
            }
            let start = self.pos;
            let name = self.ident()?;
            let args = if self.at("(") { self.arguments()? } else { Vec::new() };
            let body = if self.at("{") { Some(self.class_body()?) } else { None };
            out.push(EnumConstant {
                name,
                args,
                body,
                span: self.span_from(start),
            });
            if !self.eat(",") {
                break;
            }
        }
        self.eat(";");
        Ok(out)
    }

    fn class_body(&mut self) -> Result<Vec<Member>> {
        self.expect("{")?;
        let mut members = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unterminated class body"));
            }
            if self.eat(";") {
                continue;
            }
            members.push(self.member(false)?);
        }
        self.expect("}")?;
        Ok(members)
    }

    fn member(&mut self, in_annotation: bool) -> Result<Member> {
        if self.at("{") || (self.at("static") && self.peek_at(1).is("{")) {
            let is_static = self.eat("static");
            let body = self.block()?;
            return Ok(Member::Initializer { is_static, body });
        }
        self.skip_annotations()?;
        let start = self.pos;
        let modifiers = self.modifiers()?;
        if self.at_type_decl_keyword() || (self.at_ident("record") && self.peek_at(1).is_ident()) {
            return Ok(Member::Type(self.type_decl(start, modifiers)?));
        }
        if self.at("<") {
            self.type_params()?;
        }
        // Constructor: `Name (`
        if self.peek().is_ident() && self.peek_at(1).is("(") {
            let name = self.ident()?;
            return self.method_rest(start, modifiers, MethodKind::Constructor, name, in_annotation);
        }
        // Compact canonical constructors only exist in records.
        let ty = self.parse_type()?;
        let name = self.ident()?;
        if self.at("(") {
            let _ = ty;
            return self.method_rest(start, modifiers, MethodKind::Method, name, in_annotation);
        }
        let mut declarators = vec![self.declarator_rest(name)?];
        while self.eat(",") {
            let n = self.ident()?;
            declarators.push(self.declarator_rest(n)?);
        }
        self.expect(";")?;
        Ok(Member::Field(FieldDecl {
            modifiers,
            ty,
            declarators,
            span: self.span_from(start),
        }))
    }

    fn method_rest(
        &mut self,
        start: usize,
        modifiers: Modifiers,
        kind: MethodKind,
        name: String,
        in_annotation: bool,
    ) -> Result<Member> {
        let params = self.params()?;
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
        }
        let mut throws = Vec::new();
        if self.eat("throws") {
            throws = self.type_list()?;
        }
        let body = if self.eat(";") {
            None
        } else if in_annotation && self.eat("default") {
            self.element_value()?;
            self.expect(";")?;
            None
        } else {
            Some(self.block()?)
        };
        Ok(Member::Method(MethodDecl {
            kind,
            modifiers,
            name,
            params,
            throws,
            body,
            span: self.span_from(start),
        }))
    }

    fn element_value(&mut self) -> Result<()> {
        if self.at("@") {
            self.skip_annotations()
        } else if self.at("{") {
            self.skip_balanced("{", "}")
        } else {
            self.parse_ternary().map(|_| ())
        }
    }

    fn params(&mut self) -> Result<Vec<Param>> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            self.modifiers()?;
            let ty = self.parse_type()?;
            let varargs = self.eat("...");
            // Receiver parameter `Foo this`.
            let name = if self.eat("this") {
                "this".to_string()
            } else {
                self.ident()?
            };
            let mut ty = ty;
            while self.at("[") && self.peek_at(1).is("]") {
                self.bump();
                self.bump();
                ty.dims += 1;
            }
            out.push(Param { ty, name, varargs });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(out)
    }

    fn declarator_rest(&mut self, name: String) -> Result<VarDeclarator> {
        let mut extra_dims = 0;
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
            extra_dims += 1;
        }
        let init = if self.eat("=") { Some(self.var_init()?) } else { None };
        Ok(VarDeclarator { name, extra_dims, init })
    }

    fn var_init(&mut self) -> Result<Expr> {
        if self.at("{") {
            self.array_init()
        } else {
            self.parse_expr()
        }
    }

    fn array_init(&mut self) -> Result<Expr> {
        let start = self.pos;
        self.expect("{")?;
        let mut items = Vec::new();
        while !self.at("}") {
            items.push(self.var_init()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(Expr {
            kind: ExprKind::ArrayInit(items),
            span: self.span_from(start),
        })
    }

    // ----- types -------------------------------------------------------------

    fn parse_type(&mut self) -> Result<TypeRef> {
        self.skip_annotations()?;
        let mut ty = if PRIMITIVES.iter().any(|p| self.at(p)) {
            TypeRef {
                name: self.bump().text,
                args: Vec::new(),
                dims: 0,
            }
        } else {
            let mut name = self.ident()?;
            let mut args = Vec::new();
            if self.at("<") {
                args = self.type_args()?;
            }
            while self.at(".") && (self.peek_at(1).is_ident() || self.peek_at(1).is("@")) {
                self.bump();
                self.skip_annotations()?;
                name.push('.');
                name.push_str(&self.ident()?);
                if self.at("<") {
                    args = self.type_args()?;
                }
            }
            TypeRef { name, args, dims: 0 }
        };
        loop {
            self.skip_annotations()?;
            if self.at("[") && self.peek_at(1).is("]") {
                self.bump();
                self.bump();
                ty.dims += 1;
            } else {
                break;
            }
        }
        Ok(ty)
    }

    fn type_args(&mut self) -> Result<Vec<TypeRef>> {
        self.expect("<")?;
        let mut out = Vec::new();
        if self.eat(">") {
            return Ok(out);
        }
        loop {
            self.skip_annotations()?;
            if self.eat("?") {
                if self.eat("extends") || self.eat("super") {
                    out.push(self.parse_type()?);
                } else {
                    out.push(TypeRef {
                        name: "?".into(),
                        args: Vec::new(),
                        dims: 0,
                    });
                }
            } else {
                out.push(self.parse_type()?);
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(">")?;
        Ok(out)
    }

    // ----- statements --------------------------------------------------------

    fn block(&mut self) -> Result<Block> {
        let start = self.pos;
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unterminated block"));
            }
            stmts.push(self.statement()?);
        }
        self.expect("}")?;
        Ok(Block {
            stmts,
            span: self.span_from(start),
        })
    }

    fn simple(&self, kind: StmtKind, start: usize) -> Stmt {
        let span = self.span_from(start);
        Stmt {
            kind,
            span,
            header: span,
        }
    }

    fn compound(&self, kind: StmtKind, start: usize, header_end: usize) -> Stmt {
        let span = self.span_from(start);
        let header = Span {
            lo: start,
            hi: header_end,
            start_line: span.start_line,
            end_line: self.tokens[header_end.saturating_sub(1).max(start)].line,
        };
        Stmt { kind, span, header }
    }

    fn statement(&mut self) -> Result<Stmt> {
        let start = self.pos;
        if self.at("{") {
            let b = self.block()?;
            let mut s = self.simple(StmtKind::Block(b), start);
            s.header = Span {
                lo: start,
                hi: start + 1,
                start_line: s.span.start_line,
                end_line: s.span.start_line,
            };
            return Ok(s);
        }
        if self.eat(";") {
            return Ok(self.simple(StmtKind::Empty, start));
        }
        if self.peek().is_ident() && self.peek_at(1).is(":") {
            let label = self.ident()?;
            self.bump();
            let header_end = self.pos;
            let body = Box::new(self.statement()?);
            return Ok(self.compound(StmtKind::Labeled { label, body }, start, header_end));
        }
        if self.at("if") {
            self.bump();
            let cond = self.par_expr()?;
            let header_end = self.pos;
            let then = Box::new(self.statement()?);
            let els = if self.eat("else") {
                Some(Box::new(self.statement()?))
            } else {
                None
            };
            return Ok(self.compound(StmtKind::If { cond, then, els }, start, header_end));
        }
        if self.at("while") {
            self.bump();
            let cond = self.par_expr()?;
            let header_end = self.pos;
            let body = Box::new(self.statement()?);
            return Ok(self.compound(StmtKind::While { cond, body }, start, header_end));
        }
        if self.at("do") {
            self.bump();
            let header_end = self.pos;
            let body = Box::new(self.statement()?);
            let trailer_start = self.pos;
            self.expect("while")?;
            let cond = self.par_expr()?;
            self.expect(";")?;
            let trailer = self.span_from(trailer_start);
            return Ok(self.compound(StmtKind::DoWhile { body, cond, trailer }, start, header_end));
        }
        if self.at("for") {
            return self.for_statement(start);
        }
        if self.at("try") {
            return self.try_statement(start);
        }
        if self.at("switch") {
            self.bump();
            let selector = self.par_expr()?;
            let header_end = self.pos + 1;
            let cases = self.switch_body()?;
            return Ok(self.compound(StmtKind::Switch { selector, cases }, start, header_end));
        }
        if self.at("return") {
            self.bump();
            let e = if self.at(";") { None } else { Some(self.parse_expr()?) };
            self.expect(";")?;
            return Ok(self.simple(StmtKind::Return(e), start));
        }
        if self.at("throw") {
            self.bump();
            let e = self.parse_expr()?;
            self.expect(";")?;
            return Ok(self.simple(StmtKind::Throw(e), start));
        }
        if self.at("break") || self.at("continue") {
            let is_break = self.bump().text == "break";
            let label = if self.peek().is_ident() {
                Some(self.ident()?)
            } else {
                None
            };
            self.expect(";")?;
            let kind = if is_break {
                StmtKind::Break(label)
            } else {
                StmtKind::Continue(label)
            };
            return Ok(self.simple(kind, start));
        }
        if self.at("synchronized") && self.peek_at(1).is("(") {
            self.bump();
            let lock = self.par_expr()?;
            let header_end = self.pos;
            let body = self.block()?;
            return Ok(self.compound(StmtKind::Synchronized { lock, body }, start, header_end));
        }
        if self.at("assert") {
            self.bump();
            let cond = self.parse_expr()?;
            let message = if self.eat(":") { Some(self.parse_expr()?) } else { None };
            self.expect(";")?;
            return Ok(self.simple(StmtKind::Assert { cond, message }, start));
        }
        if self.at_ident("yield") && !matches!(self.peek_at(1).text.as_str(), "=" | "." | "(" | "[" | "++" | "--" | ";")
        {
            self.bump();
            let e = self.parse_expr()?;
            self.expect(";")?;
            return Ok(self.simple(StmtKind::Yield(e), start));
        }
        if self.at("class")
            || self.at("interface")
            || self.at("enum")
            || (self.at_ident("record") && self.peek_at(1).is_ident())
        {
            return Err(self.unsupported("local type declaration"));
        }
        if (self.at("abstract") || self.at("static"))
            && (self.peek_at(1).is("class") || self.peek_at(1).is("interface"))
        {
            return Err(self.unsupported("local type declaration"));
        }
        if self.at("final") || self.at("@") {
            let modifiers = self.modifiers()?;
            if self.at("class") || self.at("interface") || self.at("enum") {
                return Err(self.unsupported("local type declaration"));
            }
            let s = self.local_var_rest(modifiers)?;
            self.expect(";")?;
            return Ok(self.simple(s, start));
        }
        if self.looks_like_local_var() {
            let s = self.local_var_rest(Modifiers::default())?;
            self.expect(";")?;
            return Ok(self.simple(s, start));
        }
        let e = self.parse_expr()?;
        self.expect(";")?;
        Ok(self.simple(StmtKind::Expr(e), start))
    }

    fn looks_like_local_var(&mut self) -> bool {
        let save = self.pos;
        let ok = (self.peek().is_ident() || PRIMITIVES.iter().any(|p| self.at(p)))
            && self.parse_type().is_ok()
            && self.peek().is_ident()
            && matches!(self.peek_at(1).text.as_str(), "=" | ";" | "," | "[" | ":")
            && self.peek_at(1).kind == TokenKind::Operator;
        self.pos = save;
        ok
    }

    fn local_var_rest(&mut self, modifiers: Modifiers) -> Result<StmtKind> {
        let ty = self.parse_type()?;
        let mut declarators = Vec::new();
        loop {
            let name = self.ident()?;
            declarators.push(self.declarator_rest(name)?);
            if !self.eat(",") {
                break;
            }
        }
        Ok(StmtKind::LocalVar {
            modifiers,
            ty,
            declarators,
        })
    }

    fn par_expr(&mut self) -> Result<Expr> {
        self.expect("(")?;
        let e = self.parse_expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn for_statement(&mut self, start: usize) -> Result<Stmt> {
        self.expect("for")?;
        self.expect("(")?;
        // Enhanced for?
        let save = self.pos;
        let foreach = (|| -> Result<Option<(Modifiers, TypeRef, String)>> {
            let modifiers = self.modifiers()?;
            let ty = self.parse_type()?;
            let name = self.ident()?;
            if self.eat(":") {
                Ok(Some((modifiers, ty, name)))
            } else {
                Ok(None)
            }
        })();
        if let Ok(Some((modifiers, ty, name))) = foreach {
            let iterable = self.parse_expr()?;
            self.expect(")")?;
            let header_end = self.pos;
            let body = Box::new(self.statement()?);
            return Ok(self.compound(
                StmtKind::ForEach {
                    modifiers,
                    ty,
                    name,
                    iterable,
                    body,
                },
                start,
                header_end,
            ));
        }
        self.pos = save;

        let mut init = Vec::new();
        if !self.at(";") {
            let istart = self.pos;
            if self.at("final") || self.at("@") {
                let m = self.modifiers()?;
                let k = self.local_var_rest(m)?;
                init.push(self.simple(k, istart));
            } else if self.looks_like_local_var() {
                let k = self.local_var_rest(Modifiers::default())?;
                init.push(self.simple(k, istart));
            } else {
                loop {
                    let s = self.pos;
                    let e = self.parse_expr()?;
                    init.push(self.simple(StmtKind::Expr(e), s));
                    if !self.eat(",") {
                        break;
                    }
                }
            }
        }
        self.expect(";")?;
        let cond = if self.at(";") { None } else { Some(self.parse_expr()?) };
        self.expect(";")?;
        let mut update = Vec::new();
        if !self.at(")") {
            loop {
                update.push(self.parse_expr()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        let header_end = self.pos;
        let body = Box::new(self.statement()?);
        Ok(self.compound(
            StmtKind::For {
                init,
                cond,
                update,
                body,
            },
            start,
            header_end,
        ))
    }

    fn try_statement(&mut self, start: usize) -> Result<Stmt> {
        self.expect("try")?;
        let mut resources = Vec::new();
        if self.eat("(") {
            while !self.at(")") {
                let rstart = self.pos;
                let kind = if self.at("final") || self.at("@") {
                    let m = self.modifiers()?;
                    self.local_var_rest(m)?
                } else if self.looks_like_local_var() {
                    self.local_var_rest(Modifiers::default())?
                } else {
                    StmtKind::Expr(self.parse_expr()?)
                };
                resources.push(self.simple(kind, rstart));
                if !self.eat(";") {
                    break;
                }
            }
            self.expect(")")?;
        }
        let header_end = self.pos;
        let body = self.block()?;
        let mut catches = Vec::new();
        while self.at("catch") {
            let cstart = self.pos;
            self.bump();
            self.expect("(")?;
            self.modifiers()?;
            let mut types = vec![self.parse_type()?];
            while self.eat("|") {
                types.push(self.parse_type()?);
            }
            let name = self.ident()?;
            self.expect(")")?;
            let body = self.block()?;
            catches.push(CatchClause {
                types,
                name,
                body,
                span: self.span_from(cstart),
            });
        }
        let finally = if self.eat("finally") { Some(self.block()?) } else { None };
        if catches.is_empty() && finally.is_none() && resources.is_empty() {
            return Err(self.error("`try` without `catch` or `finally`"));
        }
        Ok(self.compound(
            StmtKind::Try {
                resources,
                body,
                catches,
                finally,
            },
            start,
            header_end,
        ))
    }

    fn switch_body(&mut self) -> Result<Vec<SwitchCase>> {
        self.expect("{")?;
        let mut cases = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unterminated switch"));
            }
            let lstart = self.pos;
            let mut labels = Vec::new();
            if self.eat("default") {
            } else {
                self.expect("case")?;
                loop {
                    if self.at("default") {
                        self.bump();
                    } else {
                        labels.push(self.parse_ternary()?);
                        if self.peek().is_ident() {
                            return Err(self.unsupported("type pattern in case label"));
                        }
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            let mut body = Vec::new();
            if self.eat("->") {
                let label_span = self.span_from(lstart);
                let bstart = self.pos;
                if self.at("{") || self.at("throw") {
                    body.push(self.statement()?);
                } else {
                    let e = self.parse_expr()?;
                    self.expect(";")?;
                    body.push(self.simple(StmtKind::Expr(e), bstart));
                }
                cases.push(SwitchCase {
                    labels,
                    body,
                    label_span,
                });
                continue;
            }
            self.expect(":")?;
            let label_span = self.span_from(lstart);
            while !self.at("case") && !self.at("default") && !self.at("}") {
                if self.at_eof() {
                    return Err(self.error("unterminated switch"));
                }
                body.push(self.statement()?);
            }
            // `default` may also be a modifier-free label only here.
            cases.push(SwitchCase {
                labels,
                body,
                label_span,
            });
        }
        self.expect("}")?;
        Ok(cases)
    }

    // ----- expressions -------------------------------------------------------

    fn mk(&self, kind: ExprKind, start: usize) -> Expr {
        Expr {
            kind,
            span: self.span_from(start),
        }
    }

    pub(crate) fn parse_expr(&mut self) -> Result<Expr> {
        if self.at_lambda() {
            return self.lambda();
        }
        let start = self.pos;
        let lhs = self.parse_ternary()?;
        if let Some((op, n)) = self.assign_op() {
            self.pos += n;
            let value = self.parse_expr()?;
            return Ok(self.mk(
                ExprKind::Assign {
                    op,
                    target: Box::new(lhs),
                    value: Box::new(value),
                },
                start,
            ));
        }
        Ok(lhs)
    }

    fn assign_op(&self) -> Option<(String, usize)> {
        let t = self.peek();
        if t.kind != TokenKind::Operator {
            return None;
        }
        if t.text == ">" {
            let (op, n) = angle_operator(&self.tokens, self.pos);
            return matches!(op, ">>=" | ">>>=").then(|| (op.to_string(), n));
        }
        ASSIGN_OPS.contains(&t.text.as_str()).then(|| (t.text.clone(), 1))
    }

    fn at_lambda(&self) -> bool {
        if self.peek().is_ident() && self.peek_at(1).is("->") {
            return true;
        }
        if !self.at("(") {
            return false;
        }
        let mut depth = 0usize;
        let mut i = self.pos;
        while i < self.tokens.len() {
            let t = &self.tokens[i];
            if t.is("(") {
                depth += 1;
            } else if t.is(")") {
                depth -= 1;
                if depth == 0 {
                    return self.tokens.get(i + 1).is_some_and(|t| t.is("->"));
                }
            } else if t.kind == TokenKind::Eof || t.is(";") || t.is("{") {
                return false;
            }
            i += 1;
        }
        false
    }

    fn lambda(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut params = Vec::new();
        if self.peek().is_ident() {
            params.push(self.ident()?);
        } else {
            self.expect("(")?;
            let mut depth = 0usize;
            let mut last_ident: Option<String> = None;
            loop {
                let t = self.bump();
                if t.kind == TokenKind::Eof {
                    return Err(self.error("unterminated lambda parameters"));
                }
                if t.is("(") || t.is("<") {
                    depth += 1;
                } else if (t.is(")") || t.is(">")) && depth > 0 {
                    depth -= 1;
                } else if t.is(")") {
                    if let Some(n) = last_ident.take() {
                        params.push(n);
                    }
                    break;
                } else if t.is(",") && depth == 0 {
                    if let Some(n) = last_ident.take() {
                        params.push(n);
                    }
                } else if t.is_ident() {
                    last_ident = Some(t.text.clone());
                }
            }
        }
        self.expect("->")?;
        let body = if self.at("{") {
            LambdaBody::Block(self.block()?)
        } else {
            LambdaBody::Expr(Box::new(self.parse_expr()?))
        };
        Ok(self.mk(ExprKind::Lambda { params, body }, start))
    }

    fn parse_ternary(&mut self) -> Result<Expr> {
        let start = self.pos;
        let cond = self.binary(1)?;
        if self.eat("?") {
            let then = self.parse_expr()?;
            self.expect(":")?;
            let els = if self.at_lambda() {
                self.lambda()?
            } else {
                self.parse_ternary()?
            };
            return Ok(self.mk(
                ExprKind::Conditional {
                    cond: Box::new(cond),
                    then: Box::new(then),
                    els: Box::new(els),
                },
                start,
            ));
        }
        Ok(cond)
    }

    /// Binary operator at the cursor with its precedence and token count.
    fn binary_op(&self) -> Option<(String, u8, usize)> {
        let t = self.peek();
        if t.is("instanceof") {
            return Some(("instanceof".into(), 7, 1));
        }
        if t.kind != TokenKind::Operator {
            return None;
        }
        if t.text == ">" {
            let (op, n) = angle_operator(&self.tokens, self.pos);
            let prec = match op {
                ">" | ">=" => 7,
                ">>" | ">>>" => 8,
                _ => return None,
            };
            return Some((op.to_string(), prec, n));
        }
        let prec = match t.text.as_str() {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" => 4,
            "&" => 5,
            "==" | "!=" => 6,
            "<" | "<=" => 7,
            "<<" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => return None,
        };
        Some((t.text.clone(), prec, 1))
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        let start = self.pos;
        let mut lhs = self.unary()?;
        while let Some((op, prec, n)) = self.binary_op() {
            if prec < min_prec {
                break;
            }
            self.pos += n;
            if op == "instanceof" {
                self.eat("final");
                let ty = self.parse_type()?;
                let binding = if self.peek().is_ident() {
                    Some(self.ident()?)
                } else {
                    None
                };
                lhs = self.mk(
                    ExprKind::InstanceOf {
                        expr: Box::new(lhs),
                        ty,
                        binding,
                    },
                    start,
                );
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = self.mk(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                start,
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        let start = self.pos;
        for op in ["++", "--", "+", "-", "!", "~"] {
            if self.at(op) {
                self.bump();
                let operand = self.unary()?;
                return Ok(self.mk(
                    ExprKind::Unary {
                        op: op.to_string(),
                        operand: Box::new(operand),
                        postfix: false,
                    },
                    start,
                ));
            }
        }
        if self.at("(") {
            if let Some(ty) = self.try_cast_prefix()? {
                let expr = if self.at_lambda() {
                    self.lambda()?
                } else {
                    self.unary()?
                };
                return Ok(self.mk(
                    ExprKind::Cast {
                        ty,
                        expr: Box::new(expr),
                    },
                    start,
                ));
            }
        }
        let primary = self.primary()?;
        self.postfix(primary, start)
    }

    /// Consumes `(Type)` when it starts a cast expression.
    fn try_cast_prefix(&mut self) -> Result<Option<TypeRef>> {
        let save = self.pos;
        self.bump();
        if PRIMITIVES.iter().any(|p| self.at(p)) {
            let ty = self.parse_type()?;
            if self.eat(")") {
                return Ok(Some(ty));
            }
            self.pos = save;
            return Ok(None);
        }
        if !self.peek().is_ident() {
            self.pos = save;
            return Ok(None);
        }
        let Ok(ty) = self.parse_type() else {
            self.pos = save;
            return Ok(None);
        };
        while self.eat("&") {
            if self.parse_type().is_err() {
                self.pos = save;
                return Ok(None);
            }
        }
        if !self.eat(")") {
            self.pos = save;
            return Ok(None);
        }
        let next = self.peek();
        let starts_operand = next.is_ident()
            || next.is_literal()
            || next.kind == TokenKind::StringLiteral
            || ["(", "!", "~", "this", "super", "new", "switch"]
                .iter()
                .any(|t| next.is(t))
            || PRIMITIVES.iter().any(|p| next.is(p));
        if starts_operand {
            Ok(Some(ty))
        } else {
            self.pos = save;
            Ok(None)
        }
    }

    fn arguments(&mut self) -> Result<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr> {
        let start = self.pos;
        let t = self.peek().clone();
        if t.is_literal() {
            self.bump();
            return Ok(self.mk(ExprKind::Literal(t.text), start));
        }
        if t.is("this") {
            self.bump();
            if self.at("(") {
                let args = self.arguments()?;
                return Ok(self.mk(ExprKind::CtorCall { is_super: false, args }, start));
            }
            return Ok(self.mk(ExprKind::This, start));
        }
        if t.is("super") {
            self.bump();
            if self.at("(") {
                let args = self.arguments()?;
                return Ok(self.mk(ExprKind::CtorCall { is_super: true, args }, start));
            }
            return Ok(self.mk(ExprKind::Super, start));
        }
        if t.is("new") {
            return self.creator(start);
        }
        if t.is("(") {
            self.bump();
            let inner = self.parse_expr()?;
            self.expect(")")?;
            return Ok(self.mk(ExprKind::Paren(Box::new(inner)), start));
        }
        if t.is("{") {
            return self.array_init();
        }
        if t.is("switch") {
            self.bump();
            let selector = self.par_expr()?;
            let cases = self.switch_body()?;
            return Ok(self.mk(
                ExprKind::Switch {
                    selector: Box::new(selector),
                    cases,
                },
                start,
            ));
        }
        if PRIMITIVES.iter().any(|p| t.is(p)) {
            let ty = self.parse_type()?;
            if self.eat(".") {
                self.expect("class")?;
                return Ok(self.mk(ExprKind::ClassLiteral(ty), start));
            }
            if self.at("::") {
                return Ok(self.mk(ExprKind::ClassLiteral(ty), start));
            }
            return Err(self.error(format!("unexpected type `{}` in expression", ty.name)));
        }
        if t.is_ident() {
            self.bump();
            if self.at("(") {
                let args = self.arguments()?;
                return Ok(self.mk(
                    ExprKind::MethodCall {
                        target: None,
                        name: t.text,
                        args,
                    },
                    start,
                ));
            }
            // Generic type before `::`, e.g. `ArrayList<String>::new`.
            if self.at("<") {
                let save = self.pos;
                if self.type_args().is_ok() && self.at("::") {
                    return Ok(self.mk(ExprKind::Name(t.text), start));
                }
                self.pos = save;
            }
            return Ok(self.mk(ExprKind::Name(t.text), start));
        }
        if t.kind == TokenKind::Eof {
            return Err(self.error("unexpected end of input"));
        }
        Err(self.error(format!("unexpected token `{}`", t.text)))
    }

    fn creator(&mut self, start: usize) -> Result<Expr> {
        self.expect("new")?;
        if self.at("<") {
            self.type_args()?;
        }
        self.skip_annotations()?;
        let mut ty = if PRIMITIVES.iter().any(|p| self.at(p)) {
            TypeRef {
                name: self.bump().text,
                args: Vec::new(),
                dims: 0,
            }
        } else {
            let mut name = self.ident()?;
            let mut args = Vec::new();
            if self.at("<") {
                args = self.type_args()?;
            }
            while self.eat(".") {
                self.skip_annotations()?;
                name.push('.');
                name.push_str(&self.ident()?);
                if self.at("<") {
                    args = self.type_args()?;
                }
            }
            TypeRef { name, args, dims: 0 }
        };
        if self.at("[") {
            let mut dims = Vec::new();
            while self.at("[") {
                self.bump();
                if self.eat("]") {
                    ty.dims += 1;
                } else {
                    dims.push(self.parse_expr()?);
                    self.expect("]")?;
                    ty.dims += 1;
                }
            }
            let init = if self.at("{") {
                match self.array_init()?.kind {
                    ExprKind::ArrayInit(items) => Some(items),
                    _ => unreachable!(),
                }
            } else {
                None
            };
            return Ok(self.mk(ExprKind::NewArray { ty, dims, init }, start));
        }
        let args = self.arguments()?;
        let body = if self.at("{") { Some(self.class_body()?) } else { None };
        Ok(self.mk(ExprKind::New { ty, args, body }, start))
    }

    fn postfix(&mut self, mut expr: Expr, start: usize) -> Result<Expr> {
        loop {
            if self.at(".") {
                self.bump();
                if self.at("new") {
                    // Qualified inner-class creation; the qualifier is dropped.
                    expr = self.creator(self.pos)?;
                    continue;
                }
                if self.at("<") {
                    self.type_args()?;
                }
                if self.eat("this") {
                    expr = self.mk(ExprKind::This, start);
                    continue;
                }
                if self.eat("class") {
                    let name = expr_to_type_name(&expr).unwrap_or_default();
                    expr = self.mk(
                        ExprKind::ClassLiteral(TypeRef {
                            name,
                            args: Vec::new(),
                            dims: 0,
                        }),
                        start,
                    );
                    continue;
                }
                if self.eat("super") {
                    expr = self.mk(ExprKind::Super, start);
                    continue;
                }
                let name = self.ident()?;
                if self.at("(") {
                    let args = self.arguments()?;
                    expr = self.mk(
                        ExprKind::MethodCall {
                            target: Some(Box::new(expr)),
                            name,
                            args,
                        },
                        start,
                    );
                } else {
                    expr = self.mk(
                        ExprKind::FieldAccess {
                            target: Box::new(expr),
                            name,
                        },
                        start,
                    );
                }
            } else if self.at("[") {
                if self.peek_at(1).is("]") {
                    // Array type in `Foo[].class` or `int[]::new`.
                    let mut dims = 0;
                    while self.at("[") && self.peek_at(1).is("]") {
                        self.bump();
                        self.bump();
                        dims += 1;
                    }
                    let name = expr_to_type_name(&expr).unwrap_or_default();
                    let ty = TypeRef {
                        name,
                        args: Vec::new(),
                        dims,
                    };
                    if self.eat(".") {
                        self.expect("class")?;
                    } else if !self.at("::") {
                        return Err(self.error("expected `.class` or `::` after array type"));
                    }
                    expr = self.mk(ExprKind::ClassLiteral(ty), start);
                    continue;
                }
                self.bump();
                let index = self.parse_expr()?;
                self.expect("]")?;
                expr = self.mk(
                    ExprKind::Index {
                        array: Box::new(expr),
                        index: Box::new(index),
                    },
                    start,
                );
            } else if self.at("++") || self.at("--") {
                let op = self.bump().text;
                expr = self.mk(
                    ExprKind::Unary {
                        op,
                        operand: Box::new(expr),
                        postfix: true,
                    },
                    start,
                );
            } else if self.at("::") {
                self.bump();
                if self.at("<") {
                    self.type_args()?;
                }
                let name = if self.eat("new") {
                    "new".to_string()
                } else {
                    self.ident()?
                };
                expr = self.mk(
                    ExprKind::MethodRef {
                        target: Box::new(expr),
                        name,
                    },
                    start,
                );
            } else {
                return Ok(expr);
            }
        }
    }
}

fn expr_to_type_name(e: &Expr) -> Option<String> {
    match &e.kind {
        ExprKind::Name(n) => Some(n.clone()),
        ExprKind::FieldAccess { target, name } => Some(format!("{}.{}", expr_to_type_name(target)?, name)),
        ExprKind::ClassLiteral(t) => Some(t.name.clone()),
        _ => None,
    }
}
