//! Surface syntax: a lexer/parser for types, expressions and source units,
//! and a printer whose output re-parses to an equivalent type.
//!
//! Sigils fix the variable kind syntactically: `'a` is a type variable,
//! `?f` a field variable, `@r` a row variable. The first record binding a
//! row variable fixes its definition space; later uses must agree.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::types::{Basic, Body, Kind, Label, NodeId, Tail, TypeError, TypeStore, VarId};
use crate::typing::{Const, Expr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: kind error: {msg}")]
    Kind { line: u32, col: u32, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    TyName(String),
    TVar(String),
    FVar(String),
    RVar(String),
    Int(i64),
    Str(String),
    // keywords
    Lam,
    With,
    Rec,
    Let,
    Sub,
    KwInt,
    KwStr,
    KwBool,
    KwTrue,
    KwFalse,
    KwAny,
    KwNone,
    KwUndef,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    Pipe,
    Amp,
    Bang,
    Arrow,
    Dot,
    DotDot,
    Backslash,
    Eq,
    Leq,   // <:
    Geq,   // :>
    Equiv, // =:=
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    macro_rules! push {
        ($t:expr, $c:expr) => {
            out.push(Lexed {
                tok: $t,
                line,
                col: $c,
            })
        };
    }
    while let Some(&c) = chars.peek() {
        let start_col = col;
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, start_col);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, start_col);
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, start_col);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, start_col);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, start_col);
            }
            '|' => {
                chars.next();
                col += 1;
                push!(Tok::Pipe, start_col);
            }
            '&' => {
                chars.next();
                col += 1;
                push!(Tok::Amp, start_col);
            }
            '!' => {
                chars.next();
                col += 1;
                push!(Tok::Bang, start_col);
            }
            '\\' => {
                chars.next();
                col += 1;
                push!(Tok::Backslash, start_col);
            }
            ':' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Geq, start_col);
                } else {
                    push!(Tok::Colon, start_col);
                }
            }
            '<' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&':') {
                    chars.next();
                    col += 1;
                    push!(Tok::Leq, start_col);
                } else {
                    return Err(ParseError::Syntax {
                        line,
                        col: start_col,
                        msg: "unexpected `<`".into(),
                    });
                }
            }
            '=' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&':') {
                    chars.next();
                    col += 1;
                    if chars.peek() == Some(&'=') {
                        chars.next();
                        col += 1;
                        push!(Tok::Equiv, start_col);
                    } else {
                        return Err(ParseError::Syntax {
                            line,
                            col: start_col,
                            msg: "expected `=:=`".into(),
                        });
                    }
                } else {
                    push!(Tok::Eq, start_col);
                }
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, start_col);
                } else if chars.peek().is_some_and(|c| c.is_ascii_digit()) {
                    let mut n = String::from("-");
                    while let Some(&d) = chars.peek() {
                        if d.is_ascii_digit() {
                            n.push(d);
                            chars.next();
                            col += 1;
                        } else {
                            break;
                        }
                    }
                    push!(Tok::Int(n.parse().unwrap()), start_col);
                } else {
                    return Err(ParseError::Syntax {
                        line,
                        col: start_col,
                        msg: "unexpected `-`".into(),
                    });
                }
            }
            '.' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'.') {
                    chars.next();
                    col += 1;
                    push!(Tok::DotDot, start_col);
                } else {
                    push!(Tok::Dot, start_col);
                }
            }
            '\'' | '?' | '@' => {
                let sigil = c;
                chars.next();
                col += 1;
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    return Err(ParseError::Syntax {
                        line,
                        col: start_col,
                        msg: format!("expected a name after `{}`", sigil),
                    });
                }
                let tok = match sigil {
                    '\'' => Tok::TVar(name),
                    '?' => Tok::FVar(name),
                    _ => Tok::RVar(name),
                };
                push!(tok, start_col);
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\n') => {
                            return Err(ParseError::Syntax {
                                line,
                                col: start_col,
                                msg: "unterminated string".into(),
                            })
                        }
                        Some(c2) => {
                            s.push(c2);
                            col += 1;
                        }
                        None => {
                            return Err(ParseError::Syntax {
                                line,
                                col: start_col,
                                msg: "unterminated string".into(),
                            })
                        }
                    }
                }
                push!(Tok::Str(s), start_col);
            }
            d if d.is_ascii_digit() => {
                let mut n = String::new();
                while let Some(&d2) = chars.peek() {
                    if d2.is_ascii_digit() {
                        n.push(d2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Int(n.parse().unwrap()), start_col);
            }
            a if a.is_alphabetic() || a == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let tok = match name.as_str() {
                    "lam" => Tok::Lam,
                    "with" => Tok::With,
                    "rec" => Tok::Rec,
                    "let" => Tok::Let,
                    "sub" => Tok::Sub,
                    "int" => Tok::KwInt,
                    "str" => Tok::KwStr,
                    "bool" => Tok::KwBool,
                    "true" => Tok::KwTrue,
                    "false" => Tok::KwFalse,
                    "any" => Tok::KwAny,
                    "none" => Tok::KwNone,
                    "undef" => Tok::KwUndef,
                    _ if name.chars().next().unwrap().is_uppercase() => Tok::TyName(name),
                    _ => Tok::Ident(name),
                };
                push!(tok, start_col);
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col: start_col,
                    msg: format!("unexpected character `{}`", other),
                })
            }
        }
    }
    Ok(out)
}

/// Parser state shared across one source unit, so row-variable definition
/// spaces are inferred once and checked globally.
pub struct Parser<'a> {
    st: &'a mut TypeStore,
    toks: Vec<Lexed>,
    pos: usize,
    /// Name -> excluded set of the row variable, fixed at first binding use.
    pub row_spaces: HashMap<String, BTreeSet<Label>>,
    rec_binders: Vec<(String, VarId)>,
    rec_counter: u32,
}

/// A parsed source unit: named declarations and subtype queries.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub declarations: Vec<(String, Option<NodeId>, Expr)>,
    pub queries: Vec<(NodeId, NodeId, QueryKind)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Sub,
    Equiv,
}

impl<'a> Parser<'a> {
    pub fn new(st: &'a mut TypeStore, text: &str) -> Result<Self, ParseError> {
        let toks = lex(text)?;
        Ok(Parser {
            st,
            toks,
            pos: 0,
            row_spaces: HashMap::new(),
            rec_binders: Vec::new(),
            rec_counter: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|l| &l.tok)
    }

    fn here(&self) -> (u32, u32) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|l| (l.line, l.col))
            .unwrap_or((1, 1))
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|l| l.tok.clone());
        self.pos += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn kind_err(&self, e: TypeError) -> ParseError {
        let (line, col) = self.here();
        ParseError::Kind {
            line,
            col,
            msg: e.to_string(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {}", what)))
        }
    }

    // ----- types -----

    pub fn parse_type(&mut self) -> Result<NodeId, ParseError> {
        let lhs = self.parse_union(false)?;
        if self.peek() == Some(&Tok::Arrow) {
            self.bump();
            let rhs = self.parse_type()?;
            return self.st.mk_arrow(lhs, rhs).map_err(|e| self.kind_err(e));
        }
        Ok(lhs)
    }

    fn parse_union(&mut self, in_record: bool) -> Result<NodeId, ParseError> {
        let mut acc = self.parse_inter()?;
        while self.peek() == Some(&Tok::Pipe) {
            if in_record && matches!(self.peek2(), Some(Tok::DotDot) | Some(Tok::RVar(_))) {
                break; // the record tail, not a union
            }
            self.bump();
            let rhs = self.parse_inter()?;
            acc = self.st.mk_or(acc, rhs).map_err(|e| self.kind_err(e))?;
        }
        Ok(acc)
    }

    fn parse_inter(&mut self) -> Result<NodeId, ParseError> {
        let mut acc = self.parse_neg()?;
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            let rhs = self.parse_neg()?;
            acc = self.st.mk_and(acc, rhs).map_err(|e| self.kind_err(e))?;
        }
        Ok(acc)
    }

    fn parse_neg(&mut self) -> Result<NodeId, ParseError> {
        if self.peek() == Some(&Tok::Bang) {
            self.bump();
            let t = self.parse_neg()?;
            return Ok(self.st.mk_not(t));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<NodeId, ParseError> {
        match self.bump() {
            Some(Tok::KwInt) => Ok(self.st.mk_basic(Basic::Int)),
            Some(Tok::KwStr) => Ok(self.st.mk_basic(Basic::Str)),
            Some(Tok::KwBool) => Ok(self.st.mk_bool()),
            Some(Tok::KwTrue) => Ok(self.st.mk_basic(Basic::True)),
            Some(Tok::KwFalse) => Ok(self.st.mk_basic(Basic::False)),
            Some(Tok::KwAny) => Ok(self.st.any()),
            Some(Tok::KwNone) => Ok(self.st.bottom()),
            Some(Tok::KwUndef) => Ok(self.st.undef()),
            Some(Tok::TVar(name)) => {
                let v = self.st.var(&name, Kind::Type);
                Ok(self.st.intern(Body::Var(v)))
            }
            Some(Tok::FVar(name)) => {
                let v = self.st.var(&name, Kind::Field);
                Ok(self.st.intern(Body::Var(v)))
            }
            Some(Tok::LParen) => {
                let t = self.parse_type()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Some(Tok::LBrace) => self.parse_record(),
            Some(Tok::Rec) => {
                let name = match self.bump() {
                    Some(Tok::TyName(n)) => n,
                    _ => return Err(self.err("expected a type name after `rec`")),
                };
                self.expect(Tok::Dot, "`.`")?;
                self.rec_counter += 1;
                let binder = self
                    .st
                    .var(&format!("{}%{}", name, self.rec_counter), Kind::Type);
                self.rec_binders.push((name, binder));
                let body = self.parse_type()?;
                let (_, binder) = self.rec_binders.pop().unwrap();
                self.st.mk_rec(binder, body).map_err(|e| self.kind_err(e))
            }
            Some(Tok::TyName(name)) => {
                for (n, v) in self.rec_binders.iter().rev() {
                    if *n == name {
                        let v = *v;
                        return Ok(self.st.intern(Body::Var(v)));
                    }
                }
                Err(self.err(format!("unknown type name `{}`", name)))
            }
            _ => Err(self.err("expected a type")),
        }
    }

    fn parse_record(&mut self) -> Result<NodeId, ParseError> {
        let mut fields: Vec<(Label, NodeId)> = Vec::new();
        let mut tail = Tail::Closed;
        if self.peek() == Some(&Tok::RBrace) {
            self.bump();
            return self
                .st
                .mk_record(fields, tail)
                .map_err(|e| self.kind_err(e));
        }
        loop {
            match self.peek().cloned() {
                Some(Tok::Pipe) => {
                    self.bump();
                    match self.bump() {
                        Some(Tok::DotDot) => tail = Tail::Open,
                        Some(Tok::RVar(name)) => {
                            let covered: BTreeSet<Label> = fields.iter().map(|&(l, _)| l).collect();
                            tail = Tail::Var(self.row_var(&name, covered)?);
                        }
                        _ => return Err(self.err("expected `..` or a row variable after `|`")),
                    }
                    self.expect(Tok::RBrace, "`}`")?;
                    break;
                }
                Some(Tok::RBrace) => {
                    self.bump();
                    break;
                }
                Some(Tok::Ident(_)) | Some(Tok::KwInt) | Some(Tok::KwStr) | Some(Tok::KwBool)
                | Some(Tok::KwTrue) | Some(Tok::KwFalse) | Some(Tok::KwAny) | Some(Tok::KwNone)
                | Some(Tok::KwUndef) => {
                    let name = match self.bump() {
                        Some(Tok::Ident(n)) => n,
                        Some(Tok::KwInt) => "int".to_string(),
                        Some(Tok::KwStr) => "str".to_string(),
                        Some(Tok::KwBool) => "bool".to_string(),
                        Some(Tok::KwTrue) => "true".to_string(),
                        Some(Tok::KwFalse) => "false".to_string(),
                        Some(Tok::KwAny) => "any".to_string(),
                        Some(Tok::KwNone) => "none".to_string(),
                        Some(Tok::KwUndef) => "undef".to_string(),
                        _ => unreachable!(),
                    };
                    let l = self.st.label(&name);
                    self.expect(Tok::Colon, "`:`")?;
                    let f = self.parse_field_type()?;
                    fields.push((l, f));
                    if self.peek() == Some(&Tok::Comma) {
                        self.bump();
                    }
                }
                _ => return Err(self.err("expected a field, a tail, or `}`")),
            }
        }
        self.st
            .mk_record(fields, tail)
            .map_err(|e| self.kind_err(e))
    }

    /// A field type is a union/intersection chain that stops before a tail.
    fn parse_field_type(&mut self) -> Result<NodeId, ParseError> {
        let lhs = self.parse_union(true)?;
        if self.peek() == Some(&Tok::Arrow) {
            self.bump();
            let rhs = self.parse_type()?;
            return self.st.mk_arrow(lhs, rhs).map_err(|e| self.kind_err(e));
        }
        Ok(lhs)
    }

    fn row_var(&mut self, name: &str, covered: BTreeSet<Label>) -> Result<VarId, ParseError> {
        match self.row_spaces.get(name) {
            Some(prev) if *prev != covered => {
                let (line, col) = self.here();
                return Err(ParseError::Kind {
                    line,
                    col,
                    msg: format!(
                        "row variable `@{}` was bound with definition space excluding {{{}}}, here {{{}}}",
                        name,
                        prev.iter()
                            .map(|l| self.st.label_name(*l))
                            .collect::<Vec<_>>()
                            .join(","),
                        covered
                            .iter()
                            .map(|l| self.st.label_name(*l))
                            .collect::<Vec<_>>()
                            .join(","),
                    ),
                });
            }
            Some(_) => {}
            None => {
                self.row_spaces.insert(name.to_string(), covered.clone());
            }
        }
        Ok(self.st.var(name, Kind::Row(covered)))
    }

    // ----- expressions -----

    pub fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Lam) {
            self.bump();
            let param = match self.bump() {
                Some(Tok::Ident(n)) => n,
                _ => return Err(self.err("expected a parameter name after `lam`")),
            };
            self.expect(Tok::Colon, "`:`")?;
            let annot_ty = self.parse_type()?;
            let annot = self.split_annotation(annot_ty)?;
            self.expect(Tok::Dot, "`.`")?;
            let body = self.parse_expr()?;
            return Ok(Expr::Abs {
                annot,
                param,
                body: Box::new(body),
            });
        }
        let mut acc = self.parse_postfix()?;
        while self.starts_prim() {
            let arg = if self.peek() == Some(&Tok::Lam) {
                self.parse_expr()?
            } else {
                self.parse_postfix()?
            };
            acc = Expr::App(Box::new(acc), Box::new(arg));
        }
        Ok(acc)
    }

    fn starts_prim(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Ident(_))
                | Some(Tok::Int(_))
                | Some(Tok::Str(_))
                | Some(Tok::KwTrue)
                | Some(Tok::KwFalse)
                | Some(Tok::LParen)
                | Some(Tok::LBrace)
                | Some(Tok::Lam)
        )
    }

    /// Splits an annotation type into its arrow conjuncts.
    fn split_annotation(&mut self, t: NodeId) -> Result<Vec<(NodeId, NodeId)>, ParseError> {
        let mut out = Vec::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            match self.st.body(n).clone() {
                Body::And(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                Body::Arrow(d, c) => out.push((d, c)),
                _ => {
                    return Err(
                        self.err("a lambda annotation must be an intersection of arrow types")
                    )
                }
            }
        }
        out.reverse();
        Ok(out)
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.parse_prim()?;
        loop {
            match self.peek() {
                Some(Tok::Dot) => {
                    self.bump();
                    let l = self.parse_label()?;
                    acc = Expr::Sel {
                        rec: Box::new(acc),
                        label: l,
                    };
                }
                Some(Tok::Backslash) => {
                    self.bump();
                    let l = self.parse_label()?;
                    acc = Expr::Del {
                        rec: Box::new(acc),
                        label: l,
                    };
                }
                Some(Tok::With) => {
                    self.bump();
                    let l = self.parse_label()?;
                    self.expect(Tok::Eq, "`=`")?;
                    let val = self.parse_expr()?;
                    acc = Expr::Ext {
                        rec: Box::new(acc),
                        label: l,
                        val: Box::new(val),
                    };
                    break;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_label(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Some(Tok::Ident(n)) => Ok(n),
            _ => Err(self.err("expected a label")),
        }
    }

    fn parse_prim(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Some(Tok::Ident(n)) => Ok(Expr::Var(n)),
            Some(Tok::Int(n)) => Ok(Expr::Const(Const::Int(n))),
            Some(Tok::Str(s)) => Ok(Expr::Const(Const::Str(s))),
            Some(Tok::KwTrue) => Ok(Expr::Const(Const::True)),
            Some(Tok::KwFalse) => Ok(Expr::Const(Const::False)),
            Some(Tok::LBrace) => {
                self.expect(Tok::RBrace, "`}` (records are built with `with`)")?;
                Ok(Expr::Empty)
            }
            Some(Tok::LParen) => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    // ----- units and constraint files -----

    pub fn parse_unit(&mut self) -> Result<SourceUnit, ParseError> {
        let mut declarations = Vec::new();
        let mut queries = Vec::new();
        let mut names: BTreeSet<String> = BTreeSet::new();
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Let => {
                    self.bump();
                    let name = match self.bump() {
                        Some(Tok::Ident(n)) => n,
                        _ => return Err(self.err("expected a name after `let`")),
                    };
                    if !names.insert(name.clone()) {
                        return Err(self.err(format!("duplicate declaration `{}`", name)));
                    }
                    let annot = if self.peek() == Some(&Tok::Colon) {
                        self.bump();
                        Some(self.parse_type()?)
                    } else {
                        None
                    };
                    self.expect(Tok::Eq, "`=`")?;
                    let body = self.parse_expr()?;
                    declarations.push((name, annot, body));
                }
                Tok::Sub => {
                    self.bump();
                    let t1 = self.parse_type()?;
                    let kind = match self.bump() {
                        Some(Tok::Leq) => QueryKind::Sub,
                        Some(Tok::Equiv) => QueryKind::Equiv,
                        _ => return Err(self.err("expected `<:` or `=:=`")),
                    };
                    let t2 = self.parse_type()?;
                    queries.push((t1, t2, kind));
                }
                _ => return Err(self.err("expected `let` or `sub`")),
            }
        }
        Ok(SourceUnit {
            declarations,
            queries,
        })
    }

    /// Constraint files: one `t1 <: t2` or `t1 :> t2` per line.
    pub fn parse_constraints(&mut self) -> Result<Vec<crate::tally::Constraint>, ParseError> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            let t1 = self.parse_type()?;
            let rel = match self.bump() {
                Some(Tok::Leq) => crate::tally::Rel::Leq,
                Some(Tok::Geq) => crate::tally::Rel::Geq,
                _ => return Err(self.err("expected `<:` or `:>`")),
            };
            let t2 = self.parse_type()?;
            if self.st.kind(t1) != self.st.kind(t2) {
                return Err(self.err("constraint sides have different kinds"));
            }
            out.push(crate::tally::Constraint {
                left: t1,
                rel,
                right: t2,
            });
        }
        Ok(out)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// Parses a single type from `text`.
pub fn parse_type(st: &mut TypeStore, text: &str) -> Result<NodeId, ParseError> {
    let mut p = Parser::new(st, text)?;
    let t = p.parse_type()?;
    if !p.at_end() {
        return Err(p.err("trailing input after the type"));
    }
    Ok(t)
}

/// Parses a single expression from `text`.
pub fn parse_expr(st: &mut TypeStore, text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(st, text)?;
    let e = p.parse_expr()?;
    if !p.at_end() {
        return Err(p.err("trailing input after the expression"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// Prints a type in the surface syntax. Recursive nodes get `rec X.`
/// binders. Rows print in an angle-bracket form for diagnostics.
pub fn print(st: &mut TypeStore, n: NodeId) -> String {
    let mut names: HashMap<NodeId, String> = HashMap::new();
    let mut counter = 0u32;
    collect_rec_names(st, n, &mut names, &mut counter);
    let mut opened: BTreeSet<NodeId> = BTreeSet::new();
    print_rec(st, n, &names, &mut opened, 0)
}

fn collect_rec_names(
    st: &mut TypeStore,
    n: NodeId,
    names: &mut HashMap<NodeId, String>,
    counter: &mut u32,
) {
    let mut seen = BTreeSet::new();
    fn go(
        st: &TypeStore,
        n: NodeId,
        names: &mut HashMap<NodeId, String>,
        counter: &mut u32,
        seen: &mut BTreeSet<NodeId>,
        stack: &mut Vec<NodeId>,
    ) {
        if stack.contains(&n) {
            names.entry(n).or_insert_with(|| {
                *counter += 1;
                format!("X{}", counter)
            });
            return;
        }
        if !seen.insert(n) {
            return;
        }
        stack.push(n);
        match st.body(n) {
            Body::Arrow(a, b) | Body::Or(a, b) | Body::And(a, b) => {
                go(st, *a, names, counter, seen, stack);
                go(st, *b, names, counter, seen, stack);
            }
            Body::Not(a) | Body::FieldOf(a) => go(st, *a, names, counter, seen, stack),
            Body::Record(fields, _) | Body::RowAtom(fields, _, _) => {
                for f in fields.values() {
                    go(st, *f, names, counter, seen, stack);
                }
            }
            _ => {}
        }
        stack.pop();
    }
    let mut stack = Vec::new();
    go(st, n, names, counter, &mut seen, &mut stack);
}

// Precedence levels: 0 = arrow (lowest), 1 = union, 2 = intersection,
// 3 = negation/atom.
fn print_rec(
    st: &TypeStore,
    n: NodeId,
    names: &HashMap<NodeId, String>,
    opened: &mut BTreeSet<NodeId>,
    level: u8,
) -> String {
    if let Some(name) = names.get(&n) {
        if opened.contains(&n) {
            return name.clone();
        }
        opened.insert(n);
        let body = print_body(st, n, names, opened, 0);
        opened.remove(&n);
        let s = format!("rec {}. {}", name, body);
        return if level > 0 { format!("({})", s) } else { s };
    }
    print_body(st, n, names, opened, level)
}

fn print_body(
    st: &TypeStore,
    n: NodeId,
    names: &HashMap<NodeId, String>,
    opened: &mut BTreeSet<NodeId>,
    level: u8,
) -> String {
    let wrap = |s: String, min: u8| if level > min { format!("({})", s) } else { s };
    match st.body(n) {
        Body::Var(v) => {
            let info = st.var_info(*v);
            match info.kind {
                Kind::Type => format!("'{}", info.name),
                Kind::Field => format!("?{}", info.name),
                Kind::Row(_) => format!("@{}", info.name),
            }
        }
        Body::Basic(Basic::Int) => "int".into(),
        Body::Basic(Basic::Str) => "str".into(),
        Body::Basic(Basic::True) => "true".into(),
        Body::Basic(Basic::False) => "false".into(),
        Body::Undef => "undef".into(),
        Body::Bottom(Kind::Type) => "none".into(),
        Body::Bottom(_) => "none".into(),
        Body::FieldOf(t) => print_rec(st, *t, names, opened, level),
        Body::Arrow(d, c) => {
            let ds = print_rec(st, *d, names, opened, 1);
            let cs = print_rec(st, *c, names, opened, 0);
            wrap(format!("{} -> {}", ds, cs), 0)
        }
        Body::Or(a, b) => {
            // The canonical top field-type prints through its parts.
            let as_ = print_rec(st, *a, names, opened, 1);
            let bs = print_rec(st, *b, names, opened, 1);
            wrap(format!("{} | {}", as_, bs), 1)
        }
        Body::And(a, b) => {
            let as_ = print_rec(st, *a, names, opened, 2);
            let bs = print_rec(st, *b, names, opened, 2);
            wrap(format!("{} & {}", as_, bs), 2)
        }
        Body::Not(a) => {
            if matches!(st.body(*a), Body::Bottom(Kind::Type)) {
                return "any".into();
            }
            // A field-level complement includes undef; the sigil-free
            // surface `!` takes the kind of its operand, so push the
            // negation down to atoms where the two complements coincide.
            if st.kind(*a) == Kind::Field {
                return wrap(print_field_neg(st, *a, names, opened), 1);
            }
            let inner = print_rec(st, *a, names, opened, 3);
            format!("!{}", inner)
        }
        Body::Record(fields, tail) => print_atom(st, fields, *tail, None, names, opened),
        Body::RowAtom(fields, tail, excl) => {
            print_atom(st, fields, *tail, Some(excl), names, opened)
        }
        Body::Pending => "<pending>".into(),
    }
}

/// Prints the complement of a field-type with the negation at the atoms,
/// where type- and field-level complements can be told apart.
fn print_field_neg(
    st: &TypeStore,
    n: NodeId,
    names: &HashMap<NodeId, String>,
    opened: &mut BTreeSet<NodeId>,
) -> String {
    match st.body(n) {
        Body::FieldOf(t) => {
            let inner = print_rec(st, *t, names, opened, 3);
            format!("!{} | undef", inner)
        }
        Body::Undef => "!undef".into(),
        Body::Bottom(_) => "any | undef".into(),
        Body::Var(v) => format!("!?{}", st.var_info(*v).name),
        Body::Not(a) => print_rec(st, *a, names, opened, 1),
        Body::Or(a, b) => {
            let as_ = print_field_neg(st, *a, names, opened);
            let bs = print_field_neg(st, *b, names, opened);
            format!("({}) & ({})", as_, bs)
        }
        Body::And(a, b) => {
            let as_ = print_field_neg(st, *a, names, opened);
            let bs = print_field_neg(st, *b, names, opened);
            format!("({}) | ({})", as_, bs)
        }
        b => panic!("not a field body: {:?}", b),
    }
}

fn print_atom(
    st: &TypeStore,
    fields: &BTreeMap<Label, NodeId>,
    tail: Tail,
    excl: Option<&BTreeSet<Label>>,
    names: &HashMap<NodeId, String>,
    opened: &mut BTreeSet<NodeId>,
) -> String {
    let mut parts: Vec<String> = fields
        .iter()
        .map(|(l, f)| {
            format!(
                "{}: {}",
                st.label_name(*l),
                print_rec(st, *f, names, opened, 0)
            )
        })
        .collect();
    let tail_s = match tail {
        Tail::Closed => None,
        Tail::Open => Some("..".to_string()),
        Tail::Var(v) => Some(format!("@{}", st.var_info(v).name)),
    };
    let inner = match tail_s {
        Some(t) if parts.is_empty() => format!("| {}", t),
        Some(t) => format!("{} | {}", parts.join(", "), t),
        None => {
            let s = parts.join(", ");
            parts.clear();
            s
        }
    };
    match excl {
        None => format!("{{{}}}", inner),
        Some(e) => format!(
            "<{}>_{{{}}}",
            inner,
            e.iter()
                .map(|l| st.label_name(*l))
                .collect::<Vec<_>>()
                .join(",")
        ),
    }
}
