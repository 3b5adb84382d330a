//! Surface syntax for the mini-language.
//!
//! ```text
//! unit     := funcdef+
//! funcdef  := type ident "(" params ")" block
//! type     := "void" | "qubit" | "qubit[]"
//! param    := ["ref"] "qubit" ident
//! block    := "{" stmt* "}"
//! stmt     := decl | gatecall | call | "measure" ident ";"
//!           | "return" "[" idents "]" ";" | block
//! decl     := "qubit" idents ";" | "alias" ident "=" ident ";"
//! gatecall := GATE ident ("," ident)* ";"
//! call     := ["adjoint"] ident "(" idents ")" ";"
//! ```
//!
//! `//` starts a line comment. Files use the `.qls` extension. For CX and
//! CCX the last operand is the target and the rest are controls; for
//! named calls the roles come from the callee signature (`ref` parameters
//! are targets, by-value parameters controls). `CNOT` and `TOFFOLI` are
//! accepted spellings of CX and CCX.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ir::{
    derive_qfree, refresh_points, FunctionDef, FunctionParam, Gate, Operand, Operation,
    OperationKind, Point, Program, Resource, ResourceId, ResourceKind, Role, Scope, ScopeId,
};

/// A source file to parse.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub text: String,
    pub path: String,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>, path: impl Into<String>) -> SourceUnit {
        SourceUnit {
            text: text.into(),
            path: path.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

/// Line/column range of a diagnostic, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub span: Span,
    pub message: String,
    pub path: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}:{}: {}[{}]: {}",
            self.path, self.span.line, self.span.col, sev, self.code, self.message
        )
    }
}

/// A parsed translation unit: all function definitions in source order.
#[derive(Debug, Clone)]
pub struct Unit {
    pub order: Vec<String>,
    pub functions: BTreeMap<String, FunctionDef>,
    pub path: String,
}

impl Unit {
    /// Name of the function used as the analysis entry: `main` when
    /// defined, otherwise the last definition in the file.
    pub fn entry_name(&self) -> Option<&str> {
        if self.functions.contains_key("main") {
            return Some("main");
        }
        self.order.last().map(String::as_str)
    }

    /// Assembles the entry program: the entry body with parameters
    /// reclassified (by-value to Input, ref/returned to Output) and the
    /// full function table attached for inlining.
    pub fn entry_program(&self, name: Option<&str>) -> Result<Program, Diagnostic> {
        let entry = name
            .map(str::to_string)
            .or_else(|| self.entry_name().map(str::to_string))
            .ok_or_else(|| Diagnostic {
                severity: Severity::Error,
                code: "E001",
                span: Span {
                    line: 1,
                    col: 1,
                    end_line: 1,
                    end_col: 1,
                },
                message: "unit defines no functions".to_string(),
                path: self.path.clone(),
            })?;
        let def = self.functions.get(&entry).ok_or_else(|| Diagnostic {
            severity: Severity::Error,
            code: "E005",
            span: Span {
                line: 1,
                col: 1,
                end_line: 1,
                end_col: 1,
            },
            message: format!("entry function `{entry}` is not defined"),
            path: self.path.clone(),
        })?;
        let mut program = def.body.clone();
        for id in &program.params {
            let r = &mut program.resources[id.0 as usize];
            r.kind = if r.persistent {
                ResourceKind::Output
            } else {
                ResourceKind::Input
            };
        }
        program.functions = self.functions.clone();
        derive_qfree(&mut program);
        Ok(program)
    }
}

/// Parses a source unit into function definitions. Any error diagnostic
/// prevents downstream passes.
pub fn parse(src: &SourceUnit) -> Result<Unit, Vec<Diagnostic>> {
    let tokens = lex(src)?;
    Parser::new(src, tokens).run()
}

/// Verifies alias resolution over a parsed program: every operand's
/// source name is bound to its resource, no operand dangles, and no alias
/// binds a by-value parameter of the enclosing function. Returns the
/// program unchanged on success (resolution happens during parsing; this
/// pass re-checks and normalizes).
pub fn resolve_aliases(program: &Program) -> Result<Program, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let span = Span {
        line: 0,
        col: 0,
        end_line: 0,
        end_col: 0,
    };
    for op in &program.operations {
        for o in &op.operands {
            if o.resource.0 as usize >= program.resources.len() {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    code: "E002",
                    span,
                    message: format!("operand `{}` at p{} dangles", o.name, op.point),
                    path: program.name.clone(),
                });
                continue;
            }
            let r = program.resource(o.resource);
            if !r.aliases.contains(&o.name) {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    code: "E006",
                    span,
                    message: format!(
                        "operand name `{}` at p{} is not an alias of resource `{}`",
                        o.name, op.point, r.name
                    ),
                    path: program.name.clone(),
                });
            }
        }
    }
    for scope in &program.scopes {
        for (alias, target) in &scope.aliases {
            let r = program.resource(*target);
            if (r.kind == ResourceKind::Parameter || r.kind == ResourceKind::Input)
                && !r.persistent
            {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    code: "E006",
                    span,
                    message: format!(
                        "alias `{alias}` binds by-value parameter `{}`; only `ref` \
                         parameters may be aliased across the call boundary",
                        r.name
                    ),
                    path: program.name.clone(),
                });
            }
        }
    }
    if diags.is_empty() {
        Ok(program.clone())
    } else {
        Err(diags)
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Eq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(src: &SourceUnit) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = src.text.chars().peekable();
    while let Some(c) = chars.next() {
        let start = Span {
            line,
            col,
            end_line: line,
            end_col: col,
        };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '/' => {
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                    }
                } else {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        code: "E001",
                        span: start,
                        message: "stray `/`; comments start with `//`".to_string(),
                        path: src.path.clone(),
                    });
                }
            }
            '{' => tokens.push(Token {
                tok: Tok::LBrace,
                span: start,
            }),
            '}' => tokens.push(Token {
                tok: Tok::RBrace,
                span: start,
            }),
            '(' => tokens.push(Token {
                tok: Tok::LParen,
                span: start,
            }),
            ')' => tokens.push(Token {
                tok: Tok::RParen,
                span: start,
            }),
            '[' => tokens.push(Token {
                tok: Tok::LBracket,
                span: start,
            }),
            ']' => tokens.push(Token {
                tok: Tok::RBracket,
                span: start,
            }),
            ',' => tokens.push(Token {
                tok: Tok::Comma,
                span: start,
            }),
            ';' => tokens.push(Token {
                tok: Tok::Semi,
                span: start,
            }),
            '=' => tokens.push(Token {
                tok: Tok::Eq,
                span: start,
            }),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::from(c);
                let mut end_col = col;
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        ident.push(n);
                        chars.next();
                        end_col += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    tok: Tok::Ident(ident),
                    span: Span {
                        line,
                        col: start.col,
                        end_line: line,
                        end_col,
                    },
                });
            }
            other => diags.push(Diagnostic {
                severity: Severity::Error,
                code: "E001",
                span: start,
                message: format!("unexpected character `{other}`"),
                path: src.path.clone(),
            }),
        }
        col += 1;
    }
    if diags.is_empty() {
        Ok(tokens)
    } else {
        Err(diags)
    }
}

// ---------------------------------------------------------------------------
// Parser

struct FnSig {
    params: Vec<FunctionParam>,
}

struct Parser<'a> {
    src: &'a SourceUnit,
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    signatures: BTreeMap<String, FnSig>,
}

/// Per-function build state while parsing a body.
struct BodyBuilder {
    resources: Vec<Resource>,
    scopes: Vec<Scope>,
    operations: Vec<Operation>,
    params: Vec<ResourceId>,
    returns: Vec<String>,
    /// Stack of open scopes, each with its name bindings.
    bindings: Vec<BTreeMap<String, ResourceId>>,
    scope_stack: Vec<ScopeId>,
}

impl BodyBuilder {
    fn new() -> BodyBuilder {
        BodyBuilder {
            resources: Vec::new(),
            scopes: vec![Scope {
                id: ScopeId(0),
                parent: None,
                declared: Vec::new(),
                aliases: Vec::new(),
                entry: 0,
                exit: 0,
            }],
            operations: Vec::new(),
            params: Vec::new(),
            returns: Vec::new(),
            bindings: vec![BTreeMap::new()],
            scope_stack: vec![ScopeId(0)],
        }
    }

    fn current_scope(&self) -> ScopeId {
        *self.scope_stack.last().unwrap()
    }

    fn lookup(&self, name: &str) -> Option<ResourceId> {
        self.bindings
            .iter()
            .rev()
            .find_map(|frame| frame.get(name).copied())
    }

    fn declared_here(&self, name: &str) -> bool {
        self.bindings.last().unwrap().contains_key(name)
    }

    fn declare(&mut self, name: &str, kind: ResourceKind, persistent: bool) -> ResourceId {
        let id = ResourceId(self.resources.len() as u32);
        let scope = self.current_scope();
        self.resources.push(Resource {
            id,
            name: name.to_string(),
            kind,
            scope,
            persistent,
            measured_at: None,
            aliases: BTreeSet::from([name.to_string()]),
        });
        self.scopes[scope.0 as usize].declared.push(id);
        self.bindings
            .last_mut()
            .unwrap()
            .insert(name.to_string(), id);
        id
    }

    fn bind_alias(&mut self, alias: &str, target: ResourceId) {
        let scope = self.current_scope();
        self.scopes[scope.0 as usize]
            .aliases
            .push((alias.to_string(), target));
        self.resources[target.0 as usize]
            .aliases
            .insert(alias.to_string());
        self.bindings
            .last_mut()
            .unwrap()
            .insert(alias.to_string(), target);
    }

    fn open_scope(&mut self) {
        let id = ScopeId(self.scopes.len() as u32);
        let parent = self.current_scope();
        self.scopes.push(Scope {
            id,
            parent: Some(parent),
            declared: Vec::new(),
            aliases: Vec::new(),
            entry: 0,
            exit: 0,
        });
        self.scope_stack.push(id);
        self.bindings.push(BTreeMap::new());
    }

    fn close_scope(&mut self) {
        self.scope_stack.pop();
        self.bindings.pop();
    }

    fn push_op(&mut self, kind: OperationKind, operands: Vec<Operand>) {
        let point = (self.operations.len() + 1) as Point;
        self.operations.push(Operation {
            point,
            kind,
            operands,
            qfree: false,
            inverse_of: None,
        });
    }
}

impl<'a> Parser<'a> {
    fn new(src: &'a SourceUnit, tokens: Vec<Token>) -> Parser<'a> {
        Parser {
            src,
            tokens,
            pos: 0,
            diags: Vec::new(),
            signatures: BTreeMap::new(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn span_here(&self) -> Span {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|t| t.span)
            .unwrap_or(Span {
                line: 1,
                col: 1,
                end_line: 1,
                end_col: 1,
            })
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error(&mut self, code: &'static str, span: Span, message: String) {
        self.diags.push(Diagnostic {
            severity: Severity::Error,
            code,
            span,
            message,
            path: self.src.path.clone(),
        });
    }

    fn expect(&mut self, tok: Tok, what: &str) -> bool {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            true
        } else {
            let span = self.span_here();
            self.error("E001", span, format!("expected {what}"));
            false
        }
    }

    fn expect_ident(&mut self, what: &str) -> Option<(String, Span)> {
        match self.next() {
            Some(Token {
                tok: Tok::Ident(s),
                span,
            }) => Some((s, span)),
            other => {
                let span = other.map(|t| t.span).unwrap_or_else(|| self.span_here());
                self.error("E001", span, format!("expected {what}"));
                None
            }
        }
    }

    /// Skips to the next statement boundary after an error.
    fn synchronize(&mut self) {
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Semi => {
                    self.pos += 1;
                    return;
                }
                Tok::RBrace | Tok::LBrace => return,
                _ => self.pos += 1,
            }
        }
    }

    fn run(mut self) -> Result<Unit, Vec<Diagnostic>> {
        self.collect_signatures();
        let mut order = Vec::new();
        let mut functions = BTreeMap::new();
        while self.peek().is_some() {
            if let Some(def) = self.parse_funcdef() {
                if functions.contains_key(&def.name) {
                    self.diags.push(Diagnostic {
                        severity: Severity::Error,
                        code: "E009",
                        span: self.span_here(),
                        message: format!("function `{}` defined twice", def.name),
                        path: self.src.path.clone(),
                    });
                } else {
                    order.push(def.name.clone());
                    functions.insert(def.name.clone(), def);
                }
            } else {
                break;
            }
        }
        if order.is_empty() && self.diags.is_empty() {
            self.error(
                "E001",
                Span {
                    line: 1,
                    col: 1,
                    end_line: 1,
                    end_col: 1,
                },
                "unit defines no functions".to_string(),
            );
        }
        if self.diags.iter().any(|d| d.severity == Severity::Error) {
            Err(self.diags)
        } else {
            Ok(Unit {
                order,
                functions,
                path: self.src.path.clone(),
            })
        }
    }

    /// First pass: function names and parameter lists, so calls resolve
    /// regardless of definition order.
    fn collect_signatures(&mut self) {
        let saved = self.pos;
        while self.pos < self.tokens.len() {
            if self.try_signature().is_none() {
                // Skip to the matching close brace of the body.
                let mut depth = 0usize;
                loop {
                    match self.next().map(|t| t.tok) {
                        Some(Tok::LBrace) => depth += 1,
                        Some(Tok::RBrace) => {
                            if depth <= 1 {
                                break;
                            }
                            depth -= 1;
                        }
                        None => break,
                        _ => {}
                    }
                }
            }
        }
        self.diags.clear();
        self.pos = saved;
    }

    fn try_signature(&mut self) -> Option<()> {
        self.parse_type()?;
        let (name, _) = self.expect_ident("function name")?;
        self.expect(Tok::LParen, "`(`");
        let mut params = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let by_ref = if self.peek() == Some(&Tok::Ident("ref".into())) {
                    self.pos += 1;
                    true
                } else {
                    false
                };
                if self.peek() == Some(&Tok::Ident("qubit".into())) {
                    self.pos += 1;
                }
                let (pname, _) = self.expect_ident("parameter name")?;
                params.push(FunctionParam {
                    name: pname,
                    by_ref,
                });
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`");
        self.signatures.insert(name, FnSig { params });
        // Skip the body.
        if self.peek() == Some(&Tok::LBrace) {
            let mut depth = 0usize;
            loop {
                match self.next().map(|t| t.tok) {
                    Some(Tok::LBrace) => depth += 1,
                    Some(Tok::RBrace) => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    None => break,
                    _ => {}
                }
            }
        }
        Some(())
    }

    fn parse_type(&mut self) -> Option<()> {
        match self.next() {
            Some(Token {
                tok: Tok::Ident(t), ..
            }) if t == "void" || t == "qubit" => {
                if t == "qubit" && self.peek() == Some(&Tok::LBracket) {
                    self.pos += 1;
                    self.expect(Tok::RBracket, "`]`");
                }
                Some(())
            }
            other => {
                let span = other.map(|t| t.span).unwrap_or_else(|| self.span_here());
                self.error(
                    "E001",
                    span,
                    "expected return type `void` or `qubit[]`".into(),
                );
                None
            }
        }
    }

    fn parse_funcdef(&mut self) -> Option<FunctionDef> {
        self.parse_type()?;
        let (name, name_span) = self.expect_ident("function name")?;
        if Gate::from_name(&name).is_some() {
            self.error(
                "E009",
                name_span,
                format!("`{name}` is a reserved gate name"),
            );
        }
        self.expect(Tok::LParen, "`(`");
        let mut body = BodyBuilder::new();
        let mut params = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let by_ref = if self.peek() == Some(&Tok::Ident("ref".into())) {
                    self.pos += 1;
                    true
                } else {
                    false
                };
                if !self.expect(Tok::Ident("qubit".into()), "`qubit` in parameter") {
                    return None;
                }
                let (pname, pspan) = self.expect_ident("parameter name")?;
                if body.declared_here(&pname) {
                    self.error("E003", pspan, format!("duplicate parameter `{pname}`"));
                }
                let id = body.declare(&pname, ResourceKind::Parameter, by_ref);
                body.params.push(id);
                params.push(FunctionParam {
                    name: pname,
                    by_ref,
                });
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`");
        self.parse_block(&mut body);
        // Returned names become persistent.
        for name in body.returns.clone() {
            if let Some(idx) = body
                .resources
                .iter()
                .position(|r| r.aliases.contains(&name))
            {
                body.resources[idx].persistent = true;
            }
        }
        let mut program = Program {
            name: name.clone(),
            operations: body.operations,
            scopes: body.scopes,
            resources: body.resources,
            params: body.params,
            functions: BTreeMap::new(),
        };
        refresh_points(&mut program);
        Some(FunctionDef {
            name,
            params,
            returns: body.returns,
            body: program,
        })
    }

    fn parse_block(&mut self, body: &mut BodyBuilder) {
        if !self.expect(Tok::LBrace, "`{`") {
            return;
        }
        loop {
            match self.peek() {
                None => {
                    let span = self.span_here();
                    self.error("E001", span, "unexpected end of file in block".into());
                    return;
                }
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return;
                }
                Some(Tok::LBrace) => {
                    body.open_scope();
                    self.parse_block(body);
                    body.close_scope();
                }
                _ => self.parse_stmt(body),
            }
        }
    }

    fn parse_stmt(&mut self, body: &mut BodyBuilder) {
        let Some((word, span)) = self.expect_ident("statement") else {
            self.synchronize();
            return;
        };
        match word.as_str() {
            "qubit" => self.parse_decl(body),
            "alias" => self.parse_alias(body, span),
            "measure" => self.parse_measure(body),
            "return" => self.parse_return(body),
            "adjoint" => {
                let Some((callee, cspan)) = self.expect_ident("operation after `adjoint`") else {
                    self.synchronize();
                    return;
                };
                self.parse_op_stmt(body, callee, cspan, true);
            }
            _ => self.parse_op_stmt(body, word, span, false),
        }
    }

    fn parse_decl(&mut self, body: &mut BodyBuilder) {
        loop {
            let Some((name, span)) = self.expect_ident("declared name") else {
                self.synchronize();
                return;
            };
            if body.declared_here(&name) {
                self.error(
                    "E003",
                    span,
                    format!("`{name}` already declared in this scope"),
                );
            } else {
                body.declare(&name, ResourceKind::Temporary, false);
            }
            match self.peek() {
                Some(Tok::Comma) => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        self.expect(Tok::Semi, "`;` after declaration");
    }

    fn parse_alias(&mut self, body: &mut BodyBuilder, kw_span: Span) {
        let Some((alias, aspan)) = self.expect_ident("alias name") else {
            self.synchronize();
            return;
        };
        if !self.expect(Tok::Eq, "`=` in alias declaration") {
            self.synchronize();
            return;
        }
        let Some((target, tspan)) = self.expect_ident("alias target") else {
            self.synchronize();
            return;
        };
        self.expect(Tok::Semi, "`;` after alias");
        if body.declared_here(&alias) {
            self.error(
                "E003",
                aspan,
                format!("`{alias}` already declared in this scope"),
            );
            return;
        }
        let Some(id) = body.lookup(&target) else {
            self.error(
                "E006",
                tspan,
                format!("alias of undeclared name `{target}`"),
            );
            return;
        };
        let r = &body.resources[id.0 as usize];
        if r.kind == ResourceKind::Parameter && !r.persistent {
            self.error(
                "E006",
                kw_span,
                format!(
                    "alias `{alias}` crosses the function boundary: `{target}` is a \
                     by-value parameter (declare it `ref` to allow aliasing)"
                ),
            );
            return;
        }
        body.bind_alias(&alias, id);
    }

    fn parse_measure(&mut self, body: &mut BodyBuilder) {
        let Some((name, span)) = self.expect_ident("measured name") else {
            self.synchronize();
            return;
        };
        self.expect(Tok::Semi, "`;` after measure");
        let Some(id) = body.lookup(&name) else {
            self.error(
                "E002",
                span,
                format!("use of undeclared identifier `{name}`"),
            );
            return;
        };
        body.push_op(
            OperationKind::Measure,
            vec![Operand {
                resource: id,
                role: Role::Target,
                name,
            }],
        );
    }

    fn parse_return(&mut self, body: &mut BodyBuilder) {
        if !self.expect(Tok::LBracket, "`[` after return") {
            self.synchronize();
            return;
        }
        loop {
            let Some((name, span)) = self.expect_ident("returned name") else {
                self.synchronize();
                return;
            };
            if body.lookup(&name).is_none() {
                self.error("E002", span, format!("return of undeclared name `{name}`"));
            } else if !body.returns.contains(&name) {
                body.returns.push(name);
            }
            match self.peek() {
                Some(Tok::Comma) => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        self.expect(Tok::RBracket, "`]`");
        self.expect(Tok::Semi, "`;` after return");
    }

    /// A gate application (`CX a, b;`) or a call (`f(a, b);`).
    fn parse_op_stmt(&mut self, body: &mut BodyBuilder, head: String, span: Span, adjoint: bool) {
        let is_call = self.peek() == Some(&Tok::LParen);
        if is_call {
            self.pos += 1;
            let mut names = Vec::new();
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    let Some((name, nspan)) = self.expect_ident("argument") else {
                        self.synchronize();
                        return;
                    };
                    names.push((name, nspan));
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.pos += 1;
                        }
                        _ => break,
                    }
                }
            }
            self.expect(Tok::RParen, "`)`");
            self.expect(Tok::Semi, "`;` after call");
            let Some(sig) = self.signatures.get(&head) else {
                self.error("E005", span, format!("call of undefined function `{head}`"));
                return;
            };
            if sig.params.len() != names.len() {
                self.error(
                    "E007",
                    span,
                    format!(
                        "`{head}` takes {} argument(s), {} given",
                        sig.params.len(),
                        names.len()
                    ),
                );
                return;
            }
            let roles: Vec<Role> = sig
                .params
                .iter()
                .map(|p| if p.by_ref { Role::Target } else { Role::Control })
                .collect();
            let Some(operands) = self.resolve_operands(body, &names, &roles) else {
                return;
            };
            let kind = if adjoint {
                OperationKind::AdjointCall(head)
            } else {
                OperationKind::Call(head)
            };
            body.push_op(kind, operands);
        } else {
            let Some(gate) = Gate::from_name(&head) else {
                self.error(
                    "E001",
                    span,
                    format!("`{head}` is neither a gate nor a known statement"),
                );
                self.synchronize();
                return;
            };
            let mut names = Vec::new();
            loop {
                let Some((name, nspan)) = self.expect_ident("gate operand") else {
                    self.synchronize();
                    return;
                };
                names.push((name, nspan));
                match self.peek() {
                    Some(Tok::Comma) => {
                        self.pos += 1;
                    }
                    _ => break,
                }
            }
            self.expect(Tok::Semi, "`;` after gate");
            if names.len() != gate.arity() {
                self.error(
                    "E004",
                    span,
                    format!(
                        "{} takes {} operand(s), {} given",
                        gate.name(),
                        gate.arity(),
                        names.len()
                    ),
                );
                return;
            }
            let roles: Vec<Role> = (0..gate.arity())
                .map(|i| {
                    if i < gate.control_count() {
                        Role::Control
                    } else {
                        Role::Target
                    }
                })
                .collect();
            let Some(operands) = self.resolve_operands(body, &names, &roles) else {
                return;
            };
            let kind = if adjoint && !gate.is_self_inverse() {
                OperationKind::AdjointGate(gate)
            } else {
                OperationKind::Gate(gate)
            };
            body.push_op(kind, operands);
        }
    }

    fn resolve_operands(
        &mut self,
        body: &mut BodyBuilder,
        names: &[(String, Span)],
        roles: &[Role],
    ) -> Option<Vec<Operand>> {
        let mut operands = Vec::new();
        let mut seen = BTreeSet::new();
        let mut ok = true;
        for ((name, span), role) in names.iter().zip(roles) {
            match body.lookup(name) {
                Some(id) => {
                    if !seen.insert(id) {
                        self.error(
                            "E008",
                            *span,
                            format!(
                                "`{name}` resolves to a resource already used in this operation"
                            ),
                        );
                        ok = false;
                    }
                    operands.push(Operand {
                        resource: id,
                        role: *role,
                        name: name.clone(),
                    });
                }
                None => {
                    self.error(
                        "E002",
                        *span,
                        format!("use of undeclared identifier `{name}`"),
                    );
                    ok = false;
                }
            }
        }
        ok.then_some(operands)
    }
}

// ---------------------------------------------------------------------------
// Pretty printer

/// Canonical text form of a whole unit: callees in alphabetical order,
/// the entry function last (so re-parsing selects the same entry).
pub fn pretty_program(program: &Program) -> String {
    let mut out = String::new();
    let mut names: Vec<&String> = program.functions.keys().collect();
    names.sort();
    for name in names {
        if *name == program.name {
            continue;
        }
        let def = &program.functions[name];
        pretty_function(
            &mut out,
            def.name.as_str(),
            &def.params,
            &def.returns,
            &def.body,
        );
        out.push('\n');
    }
    let returns = returned_names(program);
    let params: Vec<FunctionParam> = program
        .params
        .iter()
        .map(|id| {
            let r = program.resource(*id);
            FunctionParam {
                name: r.name.clone(),
                by_ref: r.persistent && !returns.contains(&r.name),
            }
        })
        .collect();
    pretty_function(&mut out, &program.name, &params, &returns, program);
    out
}

/// Names printed in the trailing `return` statement: persistent locals
/// plus persistent parameters recorded as returned rather than `ref`.
fn returned_names(program: &Program) -> Vec<String> {
    match program.functions.get(&program.name) {
        Some(def) => def.returns.clone(),
        None => program
            .resources
            .iter()
            .filter(|r| r.persistent && r.kind == ResourceKind::Temporary)
            .map(|r| r.name.clone())
            .collect(),
    }
}

fn pretty_function(
    out: &mut String,
    name: &str,
    params: &[FunctionParam],
    returns: &[String],
    body: &Program,
) {
    let ret_ty = if returns.is_empty() { "void" } else { "qubit[]" };
    let sig: Vec<String> = params
        .iter()
        .map(|p| {
            if p.by_ref {
                format!("ref qubit {}", p.name)
            } else {
                format!("qubit {}", p.name)
            }
        })
        .collect();
    out.push_str(&format!("{ret_ty} {name}({}) {{\n", sig.join(", ")));
    pretty_scope(out, body, ScopeId(0), 1);
    if !returns.is_empty() {
        out.push_str(&format!("    return [{}];\n", returns.join(", ")));
    }
    out.push_str("}\n");
}

fn pretty_scope(out: &mut String, body: &Program, scope: ScopeId, depth: usize) {
    let indent = "    ".repeat(depth);
    let s = body.scope(scope);
    let temps: Vec<&str> = s
        .declared
        .iter()
        .map(|id| body.resource(*id))
        .filter(|r| r.kind == ResourceKind::Temporary)
        .map(|r| r.name.as_str())
        .collect();
    if !temps.is_empty() {
        out.push_str(&format!("{indent}qubit {};\n", temps.join(", ")));
    }
    for (alias, target) in &s.aliases {
        out.push_str(&format!(
            "{indent}alias {alias} = {};\n",
            body.resource(*target).name
        ));
    }
    let mut children: Vec<&Scope> = body
        .scopes
        .iter()
        .filter(|c| c.parent == Some(scope))
        .collect();
    children.sort_by_key(|c| (c.entry == 0, c.entry, c.id.0));
    let (lo, hi) = if scope.0 == 0 {
        (1, body.operations.len() as Point)
    } else {
        (s.entry, s.exit)
    };
    let mut p = lo;
    while p >= 1 && p <= hi && !body.operations.is_empty() {
        if let Some(child) = children
            .iter()
            .find(|c| c.entry != 0 && c.entry <= p && p <= c.exit)
        {
            out.push_str(&format!("{indent}{{\n"));
            pretty_scope(out, body, child.id, depth + 1);
            out.push_str(&format!("{indent}}}\n"));
            p = child.exit + 1;
            continue;
        }
        pretty_op(out, body, body.op(p), &indent);
        p += 1;
    }
    // Scopes containing no operations print after the operation sequence.
    for child in children.iter().filter(|c| c.entry == 0) {
        out.push_str(&format!("{indent}{{\n"));
        pretty_scope(out, body, child.id, depth + 1);
        out.push_str(&format!("{indent}}}\n"));
    }
}

fn pretty_op(out: &mut String, body: &Program, op: &Operation, indent: &str) {
    let names: Vec<&str> = op.operands.iter().map(|o| o.name.as_str()).collect();
    match &op.kind {
        OperationKind::Gate(g) => {
            out.push_str(&format!("{indent}{} {};\n", g.name(), names.join(", ")))
        }
        OperationKind::AdjointGate(g) => out.push_str(&format!(
            "{indent}adjoint {} {};\n",
            g.name(),
            names.join(", ")
        )),
        OperationKind::Call(f) => out.push_str(&format!("{indent}{f}({});\n", names.join(", "))),
        OperationKind::AdjointCall(f) => {
            out.push_str(&format!("{indent}adjoint {f}({});\n", names.join(", ")))
        }
        OperationKind::Measure => out.push_str(&format!(
            "{indent}measure {};\n",
            body.resource(op.operands[0].resource).name
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const RUNNING_EXAMPLE: &str = r#"
void f(qubit x, ref qubit t) { CX x, t; }
void g(qubit x, ref qubit t) { X t; CX x, t; }
void h(qubit x, ref qubit t) { CX x, t; }
void k(ref qubit y) { X y; }

qubit[] compute(qubit x1, qubit x2, qubit y1, qubit y2) {
    qubit t1, t2, t3, t4;
    f(x1, t1);
    g(x1, t2);
    CNOT t1, t2;
    CNOT t2, y1;
    h(x1, t3);
    h(x2, t4);
    CNOT t3, y2;
    CNOT t4, y2;
    k(y2);
    return [y1, y2];
}
"#;

    fn parse_ok(text: &str) -> Unit {
        parse(&SourceUnit::new(text, "test.qls")).expect("parse should succeed")
    }

    #[test]
    fn running_example_has_nine_points() {
        let unit = parse_ok(RUNNING_EXAMPLE);
        let program = unit.entry_program(None).unwrap();
        assert_eq!(program.name, "compute");
        assert_eq!(program.len(), 9);
        assert_eq!(program.op(3).name(), "CX");
        assert_eq!(program.op(9).name(), "k");
        // Declaration and return emit no operations.
        let temps: Vec<&str> = program.temporaries().map(|r| r.name.as_str()).collect();
        assert_eq!(temps, vec!["t1", "t2", "t3", "t4"]);
        // y1, y2 persistent via return; x1, x2 are inputs.
        assert!(program.resource_by_name("y1").unwrap().persistent);
        assert!(program.resource_by_name("y2").unwrap().persistent);
        assert_eq!(
            program.resource_by_name("x1").unwrap().kind,
            ResourceKind::Input
        );
        assert_eq!(
            program.resource_by_name("y1").unwrap().kind,
            ResourceKind::Output
        );
        program.validate().unwrap();
    }

    #[test]
    fn empty_body_parses_to_empty_program() {
        let unit = parse_ok("void empty(qubit a) { }");
        let program = unit.entry_program(None).unwrap();
        assert_eq!(program.len(), 0);
    }

    #[test]
    fn call_roles_come_from_callee_signature() {
        let unit = parse_ok(RUNNING_EXAMPLE);
        let program = unit.entry_program(None).unwrap();
        let call = program.op(1); // f(x1, t1)
        assert_eq!(call.operands[0].role, Role::Control);
        assert_eq!(call.operands[1].role, Role::Target);
    }

    #[test]
    fn alias_operands_resolve_to_target_resource() {
        let unit = parse_ok(
            "void main(qubit x, ref qubit y) {\n qubit t;\n alias u = t;\n CX x, u;\n CX u, y;\n}",
        );
        let program = unit.entry_program(None).unwrap();
        let t = program.resource_by_name("t").unwrap().id;
        assert_eq!(program.op(1).operands[1].resource, t);
        assert_eq!(program.op(2).operands[0].resource, t);
        assert!(program.resource(t).aliases.contains("u"));
        resolve_aliases(&program).unwrap();
    }

    #[test]
    fn undeclared_identifier_is_rejected() {
        let err = parse(&SourceUnit::new(
            "void main(qubit x) { CX x, nowhere; }",
            "test.qls",
        ))
        .unwrap_err();
        assert!(err.iter().any(|d| d.code == "E002"));
    }

    #[test]
    fn duplicate_declaration_is_rejected() {
        let err = parse(&SourceUnit::new(
            "void main(qubit x) { qubit t; qubit t; }",
            "t.qls",
        ))
        .unwrap_err();
        assert!(err.iter().any(|d| d.code == "E003"));
    }

    #[test]
    fn alias_of_by_value_parameter_is_rejected() {
        let err = parse(&SourceUnit::new(
            "void main(qubit x) { alias u = x; X u; }",
            "t.qls",
        ))
        .unwrap_err();
        assert!(err.iter().any(|d| d.code == "E006"));
    }

    #[test]
    fn duplicate_operand_via_alias_is_rejected() {
        let err = parse(&SourceUnit::new(
            "void main(ref qubit y) { qubit t; alias u = t; CX t, u; }",
            "t.qls",
        ))
        .unwrap_err();
        assert!(err.iter().any(|d| d.code == "E008"));
    }

    #[test]
    fn gate_arity_is_checked() {
        let err = parse(&SourceUnit::new("void main(qubit a) { CX a; }", "t.qls")).unwrap_err();
        assert!(err.iter().any(|d| d.code == "E004"));
    }

    #[test]
    fn syntax_error_carries_span() {
        let err = parse(&SourceUnit::new("void main(qubit a) { CX a, ; }", "t.qls")).unwrap_err();
        assert_eq!(err[0].severity, Severity::Error);
        assert!(err[0].span.line >= 1);
        let shown = err[0].to_string();
        assert!(shown.starts_with("t.qls:1:"), "got {shown}");
    }

    #[test]
    fn scope_nesting_is_proper() {
        let unit = parse_ok(
            "void main(qubit x, ref qubit y) {\n qubit a;\n CX x, a;\n {\n qubit b;\n CX a, b;\n CX b, y;\n }\n CX a, y;\n}",
        );
        let program = unit.entry_program(None).unwrap();
        program.validate().unwrap();
        assert_eq!(program.scopes.len(), 2);
        let inner = program.scope(ScopeId(1));
        assert_eq!((inner.entry, inner.exit), (2, 3));
    }

    #[test]
    fn pretty_print_parse_is_a_fixpoint() {
        for src in [
            RUNNING_EXAMPLE,
            "void main(qubit x, ref qubit y) { qubit t; alias u = t; CX x, u; { qubit b; CX t, b; CX b, y; } measure t; }",
        ] {
            let unit = parse_ok(src);
            let program = unit.entry_program(None).unwrap();
            let printed = pretty_program(&program);
            let reparsed = parse(&SourceUnit::new(&printed, "pp.qls"))
                .unwrap_or_else(|e| panic!("reparse failed: {e:?}\n{printed}"))
                .entry_program(None)
                .unwrap();
            assert_eq!(program.operations, reparsed.operations);
            let printed2 = pretty_program(&reparsed);
            assert_eq!(printed, printed2);
        }
    }

    #[test]
    fn entry_prefers_main_then_last() {
        let unit = parse_ok("void a(qubit x) { X x; }\nvoid b(qubit x) { X x; }");
        assert_eq!(unit.entry_name(), Some("b"));
        let unit = parse_ok("void main(qubit x) { X x; }\nvoid z(qubit x) { X x; }");
        assert_eq!(unit.entry_name(), Some("main"));
    }

    #[test]
    fn qfree_is_derived_through_calls() {
        let unit = parse_ok(
            "void inner(ref qubit t) { H t; }\nvoid outer(ref qubit t) { inner(t); }\nvoid main(qubit x, ref qubit y) { qubit t; outer(t); CX x, t; CX t, y; }",
        );
        let program = unit.entry_program(None).unwrap();
        assert!(!program.op(1).qfree); // outer -> inner -> H
        assert!(program.op(2).qfree);
    }
}
