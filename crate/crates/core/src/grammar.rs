//! Concrete syntax for terms and types.
//!
//! Terms:
//!
//! ```text
//! x    \x. M    [V]    M >>= V    get(l0, \x. M)    set(l0, V, M)
//! let x = M in N    V W    M N    ( ... )
//! ```
//!
//! `>>=` is left-associative and application binds tighter. A `\` or `let`
//! extends as far right as possible. Types:
//!
//! ```text
//! wD  wS  wC  wT    d -> t    s -> k    a & b    d * s    <l0: d>
//! ```
//!
//! `->` is right-associative and loosest, `&` binds tighter, `*` tightest.
//! Sorts are inferred while parsing; errors carry byte offsets.

use std::fmt;

use thiserror::Error;

use crate::syntax::{desugar, Computation, Location, Surface, Term, TermSort, Value};
use crate::types::{Atom, NormalType, Sort, TypeExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { pos, msg: msg.into() })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Lambda,
    Dot,
    LBrack,
    RBrack,
    LParen,
    RParen,
    Comma,
    BindOp,
    Eq,
    Arrow,
    Amp,
    Star,
    Lt,
    Gt,
    Colon,
    Leq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(x) => return write!(f, "`{x}`"),
            Tok::Lambda => "`\\`",
            Tok::Dot => "`.`",
            Tok::LBrack => "`[`",
            Tok::RBrack => "`]`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Comma => "`,`",
            Tok::BindOp => "`>>=`",
            Tok::Eq => "`=`",
            Tok::Arrow => "`->`",
            Tok::Amp => "`&`",
            Tok::Star => "`*`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Colon => "`:`",
            Tok::Leq => "`<=`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut end = i;
            while let Some(&(j, d)) = it.peek() {
                if d.is_ascii_alphanumeric() || d == '_' || d == '\'' {
                    end = j + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(src[i..end].to_string()), i));
            continue;
        }
        it.next();
        let next_is = |it: &mut std::iter::Peekable<std::str::CharIndices>, want: char| {
            if it.peek().map(|&(_, d)| d) == Some(want) {
                it.next();
                true
            } else {
                false
            }
        };
        let tok = match c {
            '\\' | 'λ' => Tok::Lambda,
            '.' => Tok::Dot,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '=' => Tok::Eq,
            '&' => Tok::Amp,
            '*' => Tok::Star,
            ':' => Tok::Colon,
            '-' if next_is(&mut it, '>') => Tok::Arrow,
            '>' if next_is(&mut it, '>') => {
                if next_is(&mut it, '=') {
                    Tok::BindOp
                } else {
                    return err(i, "expected `>>=`");
                }
            }
            '>' => Tok::Gt,
            '<' if next_is(&mut it, '=') => Tok::Leq,
            '<' => Tok::Lt,
            _ => return err(i, format!("unexpected character `{c}`")),
        };
        out.push((tok, i));
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

const KEYWORDS: [&str; 8] = ["let", "in", "get", "set", "wD", "wS", "wC", "wT"];

fn parse_location(s: &str) -> Option<Location> {
    let digits = s.strip_prefix('l')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(Location)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(src)?, at: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            err(self.pos(), format!("expected {t}, found {}", self.peek()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(x) if !KEYWORDS.contains(&x.as_str()) => {
                self.bump();
                Ok(x)
            }
            other => err(self.pos(), format!("expected a variable, found {other}")),
        }
    }

    fn location(&mut self) -> Result<Location, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(x) => match parse_location(&x) {
                Some(l) => {
                    self.bump();
                    Ok(l)
                }
                None => err(pos, format!("expected a location like `l0`, found `{x}`")),
            },
            other => err(pos, format!("expected a location, found {other}")),
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            other => err(self.pos(), format!("unexpected {other}")),
        }
    }

    // ---- terms ----------------------------------------------------------

    fn expr(&mut self) -> Result<(Surface, usize), ParseError> {
        let (mut lhs, start) = self.app()?;
        while *self.peek() == Tok::BindOp {
            self.bump();
            let (rhs, rpos) = self.app()?;
            want(&lhs, TermSort::Computation, start, "the left of `>>=`")?;
            want(&rhs, TermSort::Value, rpos, "the right of `>>=`")?;
            lhs = Surface::Bind(Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, start))
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(x) => x != "in",
            Tok::Lambda | Tok::LParen | Tok::LBrack => true,
            _ => false,
        }
    }

    fn app(&mut self) -> Result<(Surface, usize), ParseError> {
        let start = self.pos();
        let (mut fun, open) = self.atom()?;
        let mut open = open;
        while !open && self.starts_atom() {
            let pos = self.pos();
            let (arg, arg_open) = self.atom()?;
            if fun.sort() != arg.sort() {
                return err(
                    pos,
                    format!("cannot apply a {} to a {}", fun.sort(), arg.sort()),
                );
            }
            fun = Surface::App { fun: Box::new(fun), arg: Box::new(arg), pos };
            open = arg_open;
        }
        Ok((fun, start))
    }

    /// Parses one atom; the flag is set when it extended to the right
    /// (`\` and `let`), so no further application argument can follow.
    fn atom(&mut self) -> Result<(Surface, bool), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Lambda => {
                self.bump();
                let x = self.ident()?;
                self.expect(Tok::Dot)?;
                let (body, bpos) = self.expr()?;
                want(&body, TermSort::Computation, bpos, "an abstraction body")?;
                Ok((Surface::Lam(x, Box::new(body)), true))
            }
            Tok::LParen => {
                self.bump();
                let (e, _) = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok((e, false))
            }
            Tok::LBrack => {
                self.bump();
                let (v, vpos) = self.expr()?;
                want(&v, TermSort::Value, vpos, "`[...]`")?;
                self.expect(Tok::RBrack)?;
                Ok((Surface::Unit(Box::new(v)), false))
            }
            Tok::Ident(k) if k == "let" => {
                self.bump();
                let x = self.ident()?;
                self.expect(Tok::Eq)?;
                let (m, mpos) = self.expr()?;
                want(&m, TermSort::Computation, mpos, "a `let` binding")?;
                if !self.is_keyword("in") {
                    return err(self.pos(), format!("expected `in`, found {}", self.peek()));
                }
                self.bump();
                let (n, npos) = self.expr()?;
                want(&n, TermSort::Computation, npos, "a `let` body")?;
                Ok((Surface::Let(x, Box::new(m), Box::new(n)), true))
            }
            Tok::Ident(k) if k == "get" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let l = self.location()?;
                self.expect(Tok::Comma)?;
                self.expect(Tok::Lambda)?;
                let x = self.ident()?;
                self.expect(Tok::Dot)?;
                let (body, bpos) = self.expr()?;
                want(&body, TermSort::Computation, bpos, "a `get` body")?;
                self.expect(Tok::RParen)?;
                Ok((Surface::Get(l, x, Box::new(body)), false))
            }
            Tok::Ident(k) if k == "set" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let l = self.location()?;
                self.expect(Tok::Comma)?;
                let (v, vpos) = self.expr()?;
                want(&v, TermSort::Value, vpos, "the value of a `set`")?;
                self.expect(Tok::Comma)?;
                let (m, mpos) = self.expr()?;
                want(&m, TermSort::Computation, mpos, "the body of a `set`")?;
                self.expect(Tok::RParen)?;
                Ok((Surface::Set(l, Box::new(v), Box::new(m)), false))
            }
            Tok::Ident(_) => Ok((Surface::Var(self.ident()?), false)),
            other => err(pos, format!("expected a term, found {other}")),
        }
    }

    // ---- types ----------------------------------------------------------

    fn ty(&mut self) -> Result<(TypeExpr, Sort), ParseError> {
        let (lhs, ls) = self.inter()?;
        if *self.peek() != Tok::Arrow {
            return Ok((lhs, ls));
        }
        let op = self.pos();
        self.bump();
        let (rhs, rs) = self.ty()?;
        match (ls, rs) {
            (Sort::Value, Sort::Computation) => {
                Ok((TypeExpr::Arrow(Box::new(lhs), Box::new(rhs)), Sort::Value))
            }
            (Sort::Store, Sort::Result) => {
                Ok((TypeExpr::StoreArrow(Box::new(lhs), Box::new(rhs)), Sort::Computation))
            }
            _ => err(op, format!("no arrow from a {ls} type to a {rs} type")),
        }
    }

    fn inter(&mut self) -> Result<(TypeExpr, Sort), ParseError> {
        let (mut lhs, ls) = self.prod()?;
        while *self.peek() == Tok::Amp {
            let op = self.pos();
            self.bump();
            let (rhs, rs) = self.prod()?;
            if rs != ls {
                return err(op, format!("cannot intersect a {ls} type with a {rs} type"));
            }
            lhs = TypeExpr::Inter(Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, ls))
    }

    fn prod(&mut self) -> Result<(TypeExpr, Sort), ParseError> {
        let (lhs, ls) = self.ty_atom()?;
        if *self.peek() != Tok::Star {
            return Ok((lhs, ls));
        }
        let op = self.pos();
        self.bump();
        let (rhs, rs) = self.ty_atom()?;
        if (ls, rs) != (Sort::Value, Sort::Store) {
            return err(op, format!("a product needs a value type and a store type, found {ls} and {rs}"));
        }
        Ok((TypeExpr::Prod(Box::new(lhs), Box::new(rhs)), Sort::Result))
    }

    fn ty_atom(&mut self) -> Result<(TypeExpr, Sort), ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(w) => {
                let s = match w.as_str() {
                    "wD" => Sort::Value,
                    "wS" => Sort::Store,
                    "wC" => Sort::Result,
                    "wT" => Sort::Computation,
                    _ => return err(pos, format!("unknown type `{w}`")),
                };
                Ok((TypeExpr::Omega(s), s))
            }
            Tok::LParen => {
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Lt => {
                let l = self.location()?;
                self.expect(Tok::Colon)?;
                let dpos = self.pos();
                let (d, ds) = self.ty()?;
                if ds != Sort::Value {
                    return err(dpos, format!("a field holds a value type, found a {ds} type"));
                }
                self.expect(Tok::Gt)?;
                Ok((TypeExpr::Field(l, Box::new(d)), Sort::Store))
            }
            other => err(pos, format!("expected a type, found {other}")),
        }
    }
}

fn want(s: &Surface, sort: TermSort, pos: usize, what: &str) -> Result<(), ParseError> {
    if s.sort() == sort {
        Ok(())
    } else {
        err(pos, format!("{what} must be a {sort}, found a {}", s.sort()))
    }
}

/// Parses a term in the surface grammar and desugars it.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let (s, _) = p.expr()?;
    p.finish()?;
    desugar(&s).map_err(|e| ParseError { pos: 0, msg: e.to_string() })
}

pub fn parse_computation(src: &str) -> Result<Computation, ParseError> {
    match parse_term(src)? {
        Term::Comp(m) => Ok(m),
        Term::Value(_) => err(0, "expected a computation, found a value"),
    }
}

pub fn parse_value(src: &str) -> Result<Value, ParseError> {
    match parse_term(src)? {
        Term::Value(v) => Ok(v),
        Term::Comp(_) => err(0, "expected a value, found a computation"),
    }
}

pub fn parse_type(src: &str) -> Result<TypeExpr, ParseError> {
    let mut p = Parser::new(src)?;
    let (t, _) = p.ty()?;
    p.finish()?;
    Ok(t)
}

/// Parses `A <= B`.
pub fn parse_subtype_query(src: &str) -> Result<(TypeExpr, TypeExpr), ParseError> {
    let mut p = Parser::new(src)?;
    let (a, sa) = p.ty()?;
    let op = p.pos();
    p.expect(Tok::Leq)?;
    let (b, sb) = p.ty()?;
    p.finish()?;
    if sa != sb {
        return err(op, format!("cannot compare a {sa} type with a {sb} type"));
    }
    Ok((a, b))
}

/// Parses `x: d, y: d'` (possibly empty).
pub fn parse_bindings(src: &str) -> Result<Vec<(String, TypeExpr)>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    if *p.peek() == Tok::Eof {
        return Ok(out);
    }
    loop {
        let x = p.ident()?;
        p.expect(Tok::Colon)?;
        let tpos = p.pos();
        let (t, s) = p.ty()?;
        if s != Sort::Value {
            return err(tpos, format!("`{x}` must have a value type, found a {s} type"));
        }
        out.push((x, t));
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.finish()?;
    Ok(out)
}

/// Parses `l0 = V, l1 = W` (possibly empty).
pub fn parse_store_bindings(src: &str) -> Result<Vec<(Location, Value)>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    if *p.peek() == Tok::Eof {
        return Ok(out);
    }
    loop {
        let l = p.location()?;
        p.expect(Tok::Eq)?;
        let vpos = p.pos();
        let (s, _) = p.expr()?;
        want(&s, TermSort::Value, vpos, "a store entry")?;
        match desugar(&s) {
            Ok(Term::Value(v)) => out.push((l, v)),
            Ok(Term::Comp(_)) => return err(vpos, "a store entry must be a value"),
            Err(e) => return err(vpos, e.to_string()),
        }
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.finish()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Var(x) => f.write_str(x),
            Value::Lam(x, m) => write!(f, "\\{x}. {m}"),
        }
    }
}

impl fmt::Display for Computation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Computation::Unit(v) => write!(f, "[{v}]"),
            Computation::Bind(m, v) => match v {
                Value::Var(_) => write!(f, "{m} >>= {v}"),
                Value::Lam(..) => write!(f, "{m} >>= ({v})"),
            },
            Computation::Get(l, x, m) => write!(f, "get({l}, \\{x}. {m})"),
            Computation::Set(l, v, m) => write!(f, "set({l}, {v}, {m})"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Value(v) => v.fmt(f),
            Term::Comp(m) => m.fmt(f),
        }
    }
}

fn write_type(t: &TypeExpr, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let (prec, body): (u8, Box<dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result + '_>) = match t {
        TypeExpr::Omega(s) => return f.write_str(s.omega_name()),
        TypeExpr::Field(l, d) => {
            write!(f, "<{l}: ")?;
            write_type(d, 0, f)?;
            return f.write_str(">");
        }
        TypeExpr::Arrow(a, b) | TypeExpr::StoreArrow(a, b) => (
            0,
            Box::new(move |f: &mut fmt::Formatter<'_>| {
                write_type(a, 1, f)?;
                f.write_str(" -> ")?;
                write_type(b, 0, f)
            }),
        ),
        TypeExpr::Inter(a, b) => (
            1,
            Box::new(move |f: &mut fmt::Formatter<'_>| {
                write_type(a, 1, f)?;
                f.write_str(" & ")?;
                write_type(b, 1, f)
            }),
        ),
        TypeExpr::Prod(a, b) => (
            2,
            Box::new(move |f: &mut fmt::Formatter<'_>| {
                write_type(a, 3, f)?;
                f.write_str(" * ")?;
                write_type(b, 3, f)
            }),
        ),
    };
    if ctx > prec {
        f.write_str("(")?;
        body(f)?;
        f.write_str(")")
    } else {
        body(f)
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_type(self, 0, f)
    }
}

impl fmt::Display for NormalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_expr().fmt(f)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_expr().fmt(f)
    }
}
