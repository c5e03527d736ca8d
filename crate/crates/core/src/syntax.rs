//! Two-sorted abstract syntax: values and computations.
//!
//! Values are variables and abstractions; computations are `[V]`, `M >>= V`,
//! `get(l, \x. M)` and `set(l, V, M)`. Terms are compared up to renaming of
//! bound variables, and substitution renames binders when it would capture.
//! Fresh names are produced by priming (`x`, `x'`, `x''`, ...), which keeps
//! every operation deterministic.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A store location `l_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location(pub u32);

impl Location {
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Var(String),
    Lam(String, Box<Computation>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Computation {
    Unit(Value),
    Bind(Box<Computation>, Value),
    /// `get(l, \x. M)`: the binder scopes over the body.
    Get(Location, String, Box<Computation>),
    Set(Location, Value, Box<Computation>),
}

/// Which of the two term sorts a term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermSort {
    Value,
    Computation,
}

impl fmt::Display for TermSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermSort::Value => f.write_str("value"),
            TermSort::Computation => f.write_str("computation"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Value(Value),
    Comp(Computation),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("sort mismatch: expected a {expected}, found a {found}")]
    SortMismatch { expected: TermSort, found: TermSort },
    #[error("ill-sorted application at offset {pos}: cannot apply a {fun} to a {arg}")]
    IllSortedApp { pos: usize, fun: TermSort, arg: TermSort },
}

// ---------------------------------------------------------------------------
// Constructors

pub fn var(x: &str) -> Value {
    Value::Var(x.to_string())
}

pub fn lam(x: &str, body: Computation) -> Value {
    Value::Lam(x.to_string(), Box::new(body))
}

pub fn unit(v: Value) -> Computation {
    Computation::Unit(v)
}

pub fn bind(m: Computation, v: Value) -> Computation {
    Computation::Bind(Box::new(m), v)
}

pub fn get(loc: Location, x: &str, body: Computation) -> Computation {
    Computation::Get(loc, x.to_string(), Box::new(body))
}

pub fn set(loc: Location, v: Value, body: Computation) -> Computation {
    Computation::Set(loc, v, Box::new(body))
}

// ---------------------------------------------------------------------------
// Free variables

impl Value {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fv_value(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_free(&self, x: &str) -> bool {
        match self {
            Value::Var(y) => y == x,
            Value::Lam(y, body) => y != x && body.is_free(x),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }
}

impl Computation {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fv_comp(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_free(&self, x: &str) -> bool {
        match self {
            Computation::Unit(v) => v.is_free(x),
            Computation::Bind(m, v) => m.is_free(x) || v.is_free(x),
            Computation::Get(_, y, body) => y != x && body.is_free(x),
            Computation::Set(_, v, body) => v.is_free(x) || body.is_free(x),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }
}

impl Term {
    pub fn sort(&self) -> TermSort {
        match self {
            Term::Value(_) => TermSort::Value,
            Term::Comp(_) => TermSort::Computation,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Term::Value(v) => v.free_vars(),
            Term::Comp(m) => m.free_vars(),
        }
    }
}

pub fn free_vars(t: &Term) -> BTreeSet<String> {
    t.free_vars()
}

fn fv_value(v: &Value, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match v {
        Value::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        Value::Lam(x, body) => {
            bound.push(x.clone());
            fv_comp(body, bound, out);
            bound.pop();
        }
    }
}

fn fv_comp(m: &Computation, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match m {
        Computation::Unit(v) => fv_value(v, bound, out),
        Computation::Bind(m, v) => {
            fv_comp(m, bound, out);
            fv_value(v, bound, out);
        }
        Computation::Get(_, x, body) => {
            bound.push(x.clone());
            fv_comp(body, bound, out);
            bound.pop();
        }
        Computation::Set(_, v, body) => {
            fv_value(v, bound, out);
            fv_comp(body, bound, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution

/// Primes `base` until it avoids every name in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// Capture-avoiding substitution `M[V/x]`.
pub fn substitute(m: &Computation, x: &str, v: &Value) -> Computation {
    let fv = v.free_vars();
    subst_comp(m, x, v, &fv)
}

/// Capture-avoiding substitution `W[V/x]` on a value.
pub fn substitute_value(w: &Value, x: &str, v: &Value) -> Value {
    let fv = v.free_vars();
    subst_value(w, x, v, &fv)
}

/// Rename the binder `y` of `body` if it would capture a free variable of the
/// substituted value, returning the binder and body to continue with.
fn open_binder(
    y: &str,
    body: &Computation,
    x: &str,
    fv: &BTreeSet<String>,
) -> (String, Computation) {
    if fv.contains(y) && body.is_free(x) {
        let mut avoid = fv.clone();
        avoid.extend(body.free_vars());
        avoid.insert(x.to_string());
        let y2 = fresh_name(y, &avoid);
        let renamed = subst_comp(body, y, &Value::Var(y2.clone()), &BTreeSet::from([y2.clone()]));
        (y2, renamed)
    } else {
        (y.to_string(), body.clone())
    }
}

fn subst_value(w: &Value, x: &str, v: &Value, fv: &BTreeSet<String>) -> Value {
    match w {
        Value::Var(y) if y == x => v.clone(),
        Value::Var(_) => w.clone(),
        Value::Lam(y, _) if y == x => w.clone(),
        Value::Lam(y, body) => {
            let (y2, body2) = open_binder(y, body, x, fv);
            Value::Lam(y2, Box::new(subst_comp(&body2, x, v, fv)))
        }
    }
}

fn subst_comp(m: &Computation, x: &str, v: &Value, fv: &BTreeSet<String>) -> Computation {
    match m {
        Computation::Unit(w) => Computation::Unit(subst_value(w, x, v, fv)),
        Computation::Bind(n, w) => {
            Computation::Bind(Box::new(subst_comp(n, x, v, fv)), subst_value(w, x, v, fv))
        }
        Computation::Get(_, y, _) if y == x => m.clone(),
        Computation::Get(loc, y, body) => {
            let (y2, body2) = open_binder(y, body, x, fv);
            Computation::Get(*loc, y2, Box::new(subst_comp(&body2, x, v, fv)))
        }
        Computation::Set(loc, w, body) => Computation::Set(
            *loc,
            subst_value(w, x, v, fv),
            Box::new(subst_comp(body, x, v, fv)),
        ),
    }
}

// ---------------------------------------------------------------------------
// Alpha-equivalence

/// Binder stacks for the two sides; a variable is resolved to its de Bruijn
/// index (innermost first) or stays free under its own name.
struct AlphaEnv<'a> {
    left: Vec<&'a str>,
    right: Vec<&'a str>,
}

impl<'a> AlphaEnv<'a> {
    fn vars_match(&self, x: &str, y: &str) -> bool {
        let ix = self.left.iter().rev().position(|b| *b == x);
        let iy = self.right.iter().rev().position(|b| *b == y);
        match (ix, iy) {
            (Some(i), Some(j)) => i == j,
            (None, None) => x == y,
            _ => false,
        }
    }

    fn values(&mut self, a: &'a Value, b: &'a Value) -> bool {
        match (a, b) {
            (Value::Var(x), Value::Var(y)) => self.vars_match(x, y),
            (Value::Lam(x, m), Value::Lam(y, n)) => self.under(x, y, m, n),
            _ => false,
        }
    }

    fn under(&mut self, x: &'a str, y: &'a str, m: &'a Computation, n: &'a Computation) -> bool {
        self.left.push(x);
        self.right.push(y);
        let r = self.comps(m, n);
        self.left.pop();
        self.right.pop();
        r
    }

    fn comps(&mut self, a: &'a Computation, b: &'a Computation) -> bool {
        use Computation::*;
        match (a, b) {
            (Unit(v), Unit(w)) => self.values(v, w),
            (Bind(m, v), Bind(n, w)) => self.comps(m, n) && self.values(v, w),
            (Get(l1, x, m), Get(l2, y, n)) => l1 == l2 && self.under(x, y, m, n),
            (Set(l1, v, m), Set(l2, w, n)) => l1 == l2 && self.values(v, w) && self.comps(m, n),
            _ => false,
        }
    }
}

impl Value {
    pub fn alpha_eq(&self, other: &Value) -> bool {
        AlphaEnv { left: Vec::new(), right: Vec::new() }.values(self, other)
    }
}

impl Computation {
    pub fn alpha_eq(&self, other: &Computation) -> bool {
        AlphaEnv { left: Vec::new(), right: Vec::new() }.comps(self, other)
    }
}

/// Alpha-equivalence on terms of the same sort.
pub fn alpha_eq(t1: &Term, t2: &Term) -> Result<bool, SyntaxError> {
    match (t1, t2) {
        (Term::Value(a), Term::Value(b)) => Ok(a.alpha_eq(b)),
        (Term::Comp(a), Term::Comp(b)) => Ok(a.alpha_eq(b)),
        _ => Err(SyntaxError::SortMismatch { expected: t1.sort(), found: t2.sort() }),
    }
}

// ---------------------------------------------------------------------------
// Surface syntax with derived forms

/// Extended grammar accepted by the parser. `App` covers both `V W` and
/// `M N`; which one is meant follows from the operand sorts. `pos` fields are
/// byte offsets into the source, kept for diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Surface {
    Var(String),
    Lam(String, Box<Surface>),
    Unit(Box<Surface>),
    Bind(Box<Surface>, Box<Surface>),
    Get(Location, String, Box<Surface>),
    Set(Location, Box<Surface>, Box<Surface>),
    Let(String, Box<Surface>, Box<Surface>),
    App { fun: Box<Surface>, arg: Box<Surface>, pos: usize },
}

impl Surface {
    /// Syntactic sort, computed without checking subterms.
    pub fn sort(&self) -> TermSort {
        match self {
            Surface::Var(_) | Surface::Lam(..) => TermSort::Value,
            _ => TermSort::Computation,
        }
    }
}

impl From<&Value> for Surface {
    fn from(v: &Value) -> Self {
        match v {
            Value::Var(x) => Surface::Var(x.clone()),
            Value::Lam(x, m) => Surface::Lam(x.clone(), Box::new(Surface::from(&**m))),
        }
    }
}

impl From<&Computation> for Surface {
    fn from(m: &Computation) -> Self {
        match m {
            Computation::Unit(v) => Surface::Unit(Box::new(v.into())),
            Computation::Bind(m, v) => Surface::Bind(Box::new((&**m).into()), Box::new(v.into())),
            Computation::Get(l, x, body) => Surface::Get(*l, x.clone(), Box::new((&**body).into())),
            Computation::Set(l, v, body) => {
                Surface::Set(*l, Box::new(v.into()), Box::new((&**body).into()))
            }
        }
    }
}

impl From<&Term> for Surface {
    fn from(t: &Term) -> Self {
        match t {
            Term::Value(v) => v.into(),
            Term::Comp(m) => m.into(),
        }
    }
}

/// Eliminates `let`, `V W` and `M N`:
///
/// * `let x = M in N` becomes `M >>= (\x. N)`
/// * `V W` becomes `[W] >>= V`
/// * `M N` becomes `M >>= (\z. N >>= z)` with `z` not free in `N`
pub fn desugar(s: &Surface) -> Result<Term, SyntaxError> {
    match s.sort() {
        TermSort::Value => desugar_value(s).map(Term::Value),
        TermSort::Computation => desugar_comp(s).map(Term::Comp),
    }
}

fn desugar_value(s: &Surface) -> Result<Value, SyntaxError> {
    match s {
        Surface::Var(x) => Ok(Value::Var(x.clone())),
        Surface::Lam(x, body) => Ok(Value::Lam(x.clone(), Box::new(desugar_comp(body)?))),
        other => Err(SyntaxError::SortMismatch {
            expected: TermSort::Value,
            found: other.sort(),
        }),
    }
}

fn desugar_comp(s: &Surface) -> Result<Computation, SyntaxError> {
    match s {
        Surface::Var(_) | Surface::Lam(..) => Err(SyntaxError::SortMismatch {
            expected: TermSort::Computation,
            found: TermSort::Value,
        }),
        Surface::Unit(v) => Ok(Computation::Unit(desugar_value(v)?)),
        Surface::Bind(m, v) => Ok(bind(desugar_comp(m)?, desugar_value(v)?)),
        Surface::Get(l, x, body) => Ok(get(*l, x, desugar_comp(body)?)),
        Surface::Set(l, v, body) => Ok(set(*l, desugar_value(v)?, desugar_comp(body)?)),
        Surface::Let(x, m, n) => Ok(bind(desugar_comp(m)?, lam(x, desugar_comp(n)?))),
        Surface::App { fun, arg, pos } => match (fun.sort(), arg.sort()) {
            (TermSort::Value, TermSort::Value) => {
                Ok(bind(unit(desugar_value(arg)?), desugar_value(fun)?))
            }
            (TermSort::Computation, TermSort::Computation) => {
                let m = desugar_comp(fun)?;
                let n = desugar_comp(arg)?;
                let z = fresh_name("z", &n.free_vars());
                Ok(bind(m, lam(&z, bind(n, Value::Var(z.clone())))))
            }
            (f, a) => Err(SyntaxError::IllSortedApp { pos: *pos, fun: f, arg: a }),
        },
    }
}

// ---------------------------------------------------------------------------
// Measures

impl Value {
    /// Number of constructor nodes other than variable occurrences.
    pub fn size(&self) -> usize {
        match self {
            Value::Var(_) => 0,
            Value::Lam(_, m) => 1 + m.size(),
        }
    }

    pub fn locations(&self, out: &mut BTreeSet<Location>) {
        if let Value::Lam(_, m) = self {
            m.locations(out);
        }
    }
}

impl Computation {
    /// Number of constructor nodes other than variable occurrences.
    pub fn size(&self) -> usize {
        match self {
            Computation::Unit(v) => 1 + v.size(),
            Computation::Bind(m, v) => 1 + m.size() + v.size(),
            Computation::Get(_, _, m) => 1 + m.size(),
            Computation::Set(_, v, m) => 1 + v.size() + m.size(),
        }
    }

    pub fn locations(&self, out: &mut BTreeSet<Location>) {
        match self {
            Computation::Unit(v) => v.locations(out),
            Computation::Bind(m, v) => {
                m.locations(out);
                v.locations(out);
            }
            Computation::Get(l, _, m) => {
                out.insert(*l);
                m.locations(out);
            }
            Computation::Set(l, v, m) => {
                out.insert(*l);
                v.locations(out);
                m.locations(out);
            }
        }
    }
}

impl Term {
    pub fn size(&self) -> usize {
        match self {
            Term::Value(v) => v.size(),
            Term::Comp(m) => m.size(),
        }
    }

    pub fn locations(&self) -> BTreeSet<Location> {
        let mut out = BTreeSet::new();
        match self {
            Term::Value(v) => v.locations(&mut out),
            Term::Comp(m) => m.locations(&mut out),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const L0: Location = Location(0);

    fn id(x: &str) -> Value {
        lam(x, unit(var(x)))
    }

    #[test]
    fn free_vars_examples() {
        assert!(id("x").free_vars().is_empty());
        assert_eq!(get(L0, "x", unit(var("y"))).free_vars(), BTreeSet::from(["y".to_string()]));
        assert_eq!(
            bind(unit(var("x")), var("y")).free_vars(),
            BTreeSet::from(["x".to_string(), "y".to_string()])
        );
    }

    #[test]
    fn substitute_examples() {
        let r = substitute(&unit(var("x")), "x", &id("y"));
        assert_eq!(r, unit(id("y")));

        // [\y.[x]] with x := y must rename the binder.
        let m = unit(lam("y", unit(var("x"))));
        let r = substitute(&m, "x", &var("y"));
        assert_eq!(r, unit(lam("y'", unit(var("y")))));

        let r = substitute(&unit(var("z")), "x", &id("y"));
        assert_eq!(r, unit(var("z")));
    }

    #[test]
    fn substitute_stops_at_shadowing_binders() {
        let m = get(L0, "x", unit(var("x")));
        assert_eq!(substitute(&m, "x", &var("q")), m);
        let v = lam("x", unit(var("x")));
        assert_eq!(substitute_value(&v, "x", &var("q")), v);
    }

    #[test]
    fn substitute_renames_get_binder() {
        let m = get(L0, "y", bind(unit(var("y")), var("x")));
        let r = substitute(&m, "x", &var("y"));
        assert_eq!(r, get(L0, "y'", bind(unit(var("y'")), var("y"))));
    }

    #[test]
    fn alpha_eq_examples() {
        let t = |v: Value| Term::Value(v);
        assert!(alpha_eq(&t(id("x")), &t(id("y"))).unwrap());
        assert!(!alpha_eq(&t(id("x")), &t(lam("x", unit(var("z"))))).unwrap());
        let a = Term::Comp(get(L0, "x", unit(var("x"))));
        let b = Term::Comp(get(L0, "w", unit(var("w"))));
        assert!(alpha_eq(&a, &b).unwrap());
        assert!(matches!(alpha_eq(&a, &t(id("x"))), Err(SyntaxError::SortMismatch { .. })));
    }

    #[test]
    fn alpha_eq_distinguishes_binding_structure() {
        // \x.\y.[x] vs \x.\y.[y]
        let a = lam("x", unit(lam("y", unit(var("x")))));
        let b = lam("x", unit(lam("y", unit(var("y")))));
        assert!(!a.alpha_eq(&b));
        // free variable vs bound variable with the same name
        let c = lam("x", unit(var("y")));
        let d = lam("y", unit(var("y")));
        assert!(!c.alpha_eq(&d));
    }

    #[test]
    fn desugar_derived_forms() {
        let m = Surface::Unit(Box::new(Surface::Var("a".into())));
        let n = Surface::Unit(Box::new(Surface::Var("x".into())));
        let s = Surface::Let("x".into(), Box::new(m.clone()), Box::new(n.clone()));
        assert_eq!(
            desugar(&s).unwrap(),
            Term::Comp(bind(unit(var("a")), lam("x", unit(var("x")))))
        );

        let s = Surface::App {
            fun: Box::new(Surface::Var("f".into())),
            arg: Box::new(Surface::Var("w".into())),
            pos: 0,
        };
        assert_eq!(desugar(&s).unwrap(), Term::Comp(bind(unit(var("w")), var("f"))));

        // M N where N mentions z: the fresh binder must avoid it
        let nz = Surface::Unit(Box::new(Surface::Var("z".into())));
        let s = Surface::App { fun: Box::new(m), arg: Box::new(nz), pos: 0 };
        assert_eq!(
            desugar(&s).unwrap(),
            Term::Comp(bind(unit(var("a")), lam("z'", bind(unit(var("z")), var("z'")))))
        );
    }

    #[test]
    fn desugar_rejects_mixed_application() {
        let s = Surface::App {
            fun: Box::new(Surface::Var("f".into())),
            arg: Box::new(Surface::Unit(Box::new(Surface::Var("w".into())))),
            pos: 7,
        };
        assert_eq!(
            desugar(&s),
            Err(SyntaxError::IllSortedApp {
                pos: 7,
                fun: TermSort::Value,
                arg: TermSort::Computation
            })
        );
    }

    #[test]
    fn desugar_is_identity_on_core_terms() {
        let m = set(L0, id("x"), get(L0, "y", bind(unit(var("y")), id("z"))));
        let t = Term::Comp(m);
        assert_eq!(desugar(&Surface::from(&t)).unwrap(), t);
    }

    #[test]
    fn size_ignores_variable_occurrences() {
        assert_eq!(id("x").size(), 2);
        assert_eq!(get(L0, "x", unit(var("x"))).size(), 2);
        assert_eq!(bind(unit(id("x")), id("y")).size(), 6);
    }
}
