//! Denotations in the filter model, the monadic laws, and two operational
//! engines: a law-based rewriter and a concrete-store evaluator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::filters::{
    member_bind_nf, member_get_nf, member_set_nf, member_unit_nf, Bounds, DenHandle, PrincipalFilter,
};
use crate::subtyping::atom_is_top;
use crate::syntax::{
    bind, fresh_name, get, lam, set, substitute, unit, var, Computation, Location, Term, Value,
};
use crate::types::{Atom, NormalType, Sort, TypeError, TypeExpr};
use crate::typing::{derive_search, Context, Judgment, TypeSet};

/// Variable assignment into principal value filters. Unbound variables
/// denote `↑wD`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Env(BTreeMap<String, PrincipalFilter>);

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    /// `e_G`: each `x: d` of the context becomes `x ↦ ↑d`.
    pub fn from_context(ctx: &Context) -> Self {
        Env(ctx.iter().map(|(x, d)| (x.clone(), PrincipalFilter::new(d.clone()))).collect())
    }

    pub fn lookup(&self, x: &str) -> PrincipalFilter {
        self.0.get(x).cloned().unwrap_or_else(|| PrincipalFilter::top(Sort::Value))
    }

    pub fn extend(&self, x: &str, f: PrincipalFilter) -> Self {
        let mut m = self.0.clone();
        m.insert(x.to_string(), f);
        Env(m)
    }
}

/// The meaning of a term, kept symbolic: one node per semantic clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Denotation {
    Principal(PrincipalFilter),
    /// `Λ(X ↦ [[M]] e[x ↦ X])`
    Abs(String, Computation, Env),
    Unit(Box<Denotation>),
    Bind(Box<Denotation>, Box<Denotation>),
    Get(Location, Box<Denotation>),
    Set(Location, Box<Denotation>, Box<Denotation>),
}

pub fn interpret(t: &Term, e: &Env) -> Denotation {
    match t {
        Term::Value(v) => interpret_value(v, e),
        Term::Comp(m) => interpret_comp(m, e),
    }
}

pub fn interpret_value(v: &Value, e: &Env) -> Denotation {
    match v {
        Value::Var(x) => Denotation::Principal(e.lookup(x)),
        Value::Lam(x, m) => Denotation::Abs(x.clone(), (**m).clone(), e.clone()),
    }
}

pub fn interpret_comp(m: &Computation, e: &Env) -> Denotation {
    match m {
        Computation::Unit(v) => Denotation::Unit(Box::new(interpret_value(v, e))),
        Computation::Bind(m, v) => {
            Denotation::Bind(Box::new(interpret_comp(m, e)), Box::new(interpret_value(v, e)))
        }
        Computation::Get(l, x, body) => {
            Denotation::Get(*l, Box::new(Denotation::Abs(x.clone(), (**body).clone(), e.clone())))
        }
        Computation::Set(l, v, body) => {
            Denotation::Set(*l, Box::new(interpret_value(v, e)), Box::new(interpret_comp(body, e)))
        }
    }
}

impl DenHandle for Denotation {
    fn sort(&self) -> Sort {
        match self {
            Denotation::Principal(f) => f.sort(),
            Denotation::Abs(..) => Sort::Value,
            _ => Sort::Computation,
        }
    }

    fn member(&self, target: &NormalType, b: &Bounds) -> bool {
        if target.sort() != DenHandle::sort(self) {
            return false;
        }
        match self {
            Denotation::Principal(f) => f.contains(target),
            Denotation::Abs(x, body, e) => target.conjuncts().iter().all(|a| match a {
                _ if atom_is_top(a) => true,
                Atom::Arrow(d, t) => {
                    interpret_comp(body, &e.extend(x, PrincipalFilter::new(d.clone()))).member(t, b)
                }
                _ => false,
            }),
            Denotation::Unit(v) => member_unit_nf(&**v, target, b),
            Denotation::Bind(t, v) => member_bind_nf(&**t, &**v, target, b),
            Denotation::Get(l, v) => member_get_nf(*l, &**v, target, b),
            Denotation::Set(l, v, t) => member_set_nf(*l, &**v, &**t, target, b),
        }
    }
}

pub fn member_den(d: &Denotation, phi: &TypeExpr, b: &Bounds) -> Result<bool, TypeError> {
    let s = phi.sort()?;
    let want = DenHandle::sort(d);
    if s != want {
        return Err(TypeError::SortMismatch { left: want, right: s });
    }
    Ok(d.member(&phi.normalize(), b))
}

/// The types of depth at most `out_depth` in the filter denoted by `t` under
/// `e_ctx`.
pub fn type_members(t: &Term, ctx: &Context, out_depth: usize, b: &Bounds) -> Result<TypeSet, TypeError> {
    let d = interpret(t, &Env::from_context(ctx));
    let sort = DenHandle::sort(&d);
    TypeSet::from_predicate(sort, out_depth, &b.locs, |a| d.member(&NormalType::atom(a.clone()), b))
}

// ---------------------------------------------------------------------------
// Laws

/// An instance of one of the five equations between computations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LawInstance {
    /// `[V] >>= (\x. M) = M[V/x]`
    LeftUnit { v: Value, x: String, m: Computation },
    /// `M >>= (\x. [x]) = M`
    RightUnit { m: Computation, x: String },
    /// `(L >>= \x. M) >>= \y. N = L >>= \x. (M >>= \y. N)`, `x` not free in `\y. N`
    Assoc { l: Computation, x: String, m: Computation, y: String, n: Computation },
    /// `get(l, \x. M) >>= W = get(l, \x. (M >>= W))`, `x` not free in `W`
    GetBind { loc: Location, x: String, m: Computation, w: Value },
    /// `set(l, V, M) >>= W = set(l, V, M >>= W)`
    SetBind { loc: Location, v: Value, m: Computation, w: Value },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LawError {
    #[error("side condition of law {law} violated: `{var}` must not be free in `{term}`")]
    SideCondition { law: u8, var: String, term: String },
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl LawInstance {
    pub fn law(&self) -> u8 {
        match self {
            LawInstance::LeftUnit { .. } => 1,
            LawInstance::RightUnit { .. } => 2,
            LawInstance::Assoc { .. } => 3,
            LawInstance::GetBind { .. } => 4,
            LawInstance::SetBind { .. } => 5,
        }
    }

    /// Both sides, after checking the freshness side conditions.
    pub fn sides(&self) -> Result<(Computation, Computation), LawError> {
        let violated = |var: &str, term: String| LawError::SideCondition {
            law: self.law(),
            var: var.to_string(),
            term,
        };
        Ok(match self {
            LawInstance::LeftUnit { v, x, m } => {
                (bind(unit(v.clone()), lam(x, m.clone())), substitute(m, x, v))
            }
            LawInstance::RightUnit { m, x } => (bind(m.clone(), lam(x, unit(var(x)))), m.clone()),
            LawInstance::Assoc { l, x, m, y, n } => {
                let k = lam(y, n.clone());
                if k.is_free(x) {
                    return Err(violated(x, k.to_string()));
                }
                (
                    bind(bind(l.clone(), lam(x, m.clone())), k.clone()),
                    bind(l.clone(), lam(x, bind(m.clone(), k))),
                )
            }
            LawInstance::GetBind { loc, x, m, w } => {
                if w.is_free(x) {
                    return Err(violated(x, w.to_string()));
                }
                (
                    bind(get(*loc, x, m.clone()), w.clone()),
                    get(*loc, x, bind(m.clone(), w.clone())),
                )
            }
            LawInstance::SetBind { loc, v, m, w } => (
                bind(set(*loc, v.clone(), m.clone()), w.clone()),
                set(*loc, v.clone(), bind(m.clone(), w.clone())),
            ),
        })
    }
}

impl fmt::Display for LawInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sides() {
            Ok((a, b)) => write!(f, "law {}: {a} = {b}", self.law()),
            Err(e) => write!(f, "law {}: {e}", self.law()),
        }
    }
}

/// Compares the semantic type sets of both sides (closed, empty context).
pub fn check_law_instance(inst: &LawInstance, k: usize, b: &Bounds) -> Result<bool, LawError> {
    let (lhs, rhs) = inst.sides()?;
    let ctx = Context::new();
    let a = type_members(&Term::Comp(lhs), &ctx, k, b)?;
    let c = type_members(&Term::Comp(rhs), &ctx, k, b)?;
    Ok(a == c)
}

// ---------------------------------------------------------------------------
// Rewriting

/// One rewrite: the law used and the whole term afterwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub law: u8,
    pub result: Computation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rewrite {
    pub normal_form: Computation,
    pub steps: Vec<Step>,
    /// Set when fuel ran out before a normal form was reached.
    pub exhausted: bool,
}

/// Rewrites with laws 1, 3, 4 and 5 left to right, leftmost-outermost redex
/// first. When none applies, one law-2 step is tried and the loop resumes.
/// Every step costs one unit of fuel.
pub fn rewrite_normalize(m: &Computation, fuel: usize) -> Rewrite {
    let mut cur = m.clone();
    let mut steps = Vec::new();
    loop {
        let next = step_comp(&cur, &[1, 3, 4, 5]).or_else(|| step_comp(&cur, &[2]));
        let Some((law, after)) = next else {
            return Rewrite { normal_form: cur, steps, exhausted: false };
        };
        if steps.len() == fuel {
            return Rewrite { normal_form: cur, steps, exhausted: true };
        }
        steps.push(Step { law, result: after.clone() });
        cur = after;
    }
}

fn step_comp(m: &Computation, laws: &[u8]) -> Option<(u8, Computation)> {
    for &law in laws {
        if let Some(r) = contract(m, law) {
            return Some((law, r));
        }
    }
    match m {
        Computation::Unit(v) => step_value(v, laws).map(|(l, v)| (l, unit(v))),
        Computation::Bind(n, v) => step_comp(n, laws)
            .map(|(l, n)| (l, bind(n, v.clone())))
            .or_else(|| step_value(v, laws).map(|(l, v)| (l, bind((**n).clone(), v)))),
        Computation::Get(loc, x, body) => step_comp(body, laws).map(|(l, b)| (l, get(*loc, x, b))),
        Computation::Set(loc, v, body) => step_value(v, laws)
            .map(|(l, v)| (l, set(*loc, v, (**body).clone())))
            .or_else(|| step_comp(body, laws).map(|(l, b)| (l, set(*loc, v.clone(), b)))),
    }
}

fn step_value(v: &Value, laws: &[u8]) -> Option<(u8, Value)> {
    match v {
        Value::Var(_) => None,
        Value::Lam(x, body) => step_comp(body, laws).map(|(l, b)| (l, lam(x, b))),
    }
}

/// Renames binder `x` of body `m` so that it avoids `avoid`.
fn rebind(x: &str, m: &Computation, avoid: &BTreeSet<String>) -> (String, Computation) {
    if !avoid.contains(x) {
        return (x.to_string(), m.clone());
    }
    let mut taken = avoid.clone();
    taken.extend(m.free_vars());
    let y = fresh_name(x, &taken);
    let renamed = substitute(m, x, &var(&y));
    (y, renamed)
}

fn contract(m: &Computation, law: u8) -> Option<Computation> {
    let Computation::Bind(lhs, w) = m else { return None };
    match (law, &**lhs, w) {
        (1, Computation::Unit(v), Value::Lam(x, body)) => Some(substitute(body, x, v)),
        (2, _, Value::Lam(x, body)) if **body == unit(var(x)) => Some((**lhs).clone()),
        (3, Computation::Bind(l, Value::Lam(x, mm)), Value::Lam(..)) => {
            let (x, mm) = rebind(x, mm, &w.free_vars());
            Some(bind((**l).clone(), lam(&x, bind(mm, w.clone()))))
        }
        (4, Computation::Get(loc, x, body), _) => {
            let (x, body) = rebind(x, body, &w.free_vars());
            Some(get(*loc, &x, bind(body, w.clone())))
        }
        (5, Computation::Set(loc, v, body), _) => {
            Some(set(*loc, v.clone(), bind((**body).clone(), w.clone())))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Concrete stores

/// Finite map from locations to closed values; unassigned locations hold
/// `\x. [x]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Store(BTreeMap<Location, Value>);

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn default_value() -> Value {
        lam("x", unit(var("x")))
    }

    pub fn lookup(&self, l: Location) -> Value {
        self.0.get(&l).cloned().unwrap_or_else(Store::default_value)
    }

    pub fn update(&mut self, l: Location, v: Value) {
        self.0.insert(l, v);
    }

    pub fn with(mut self, l: Location, v: Value) -> Self {
        self.update(l, v);
        self
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Location, &Value)> {
        self.0.iter()
    }
}

impl FromIterator<(Location, Value)> for Store {
    fn from_iter<I: IntoIterator<Item = (Location, Value)>>(iter: I) -> Self {
        Store(iter.into_iter().collect())
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (l, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l} = {v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalResult {
    Done { value: Value, store: Store },
    FuelExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("cannot evaluate an open term; free variables: {}", .0.iter().cloned().collect::<Vec<_>>().join(", "))]
    Open(BTreeSet<String>),
    #[error("store entry at {0} is not closed")]
    OpenStore(Location),
}

/// Big-step evaluation with an explicit continuation stack. Each bind
/// unfolding (substituting a returned value into a continuation) costs one
/// unit of fuel.
pub fn eval_with_store(m: &Computation, s: &Store, fuel: usize) -> Result<EvalResult, EvalError> {
    let fv = m.free_vars();
    if !fv.is_empty() {
        return Err(EvalError::Open(fv));
    }
    if let Some((l, _)) = s.entries().find(|(_, v)| !v.is_closed()) {
        return Err(EvalError::OpenStore(*l));
    }
    let mut store = s.clone();
    let mut konts: Vec<Value> = Vec::new();
    let mut cur = m.clone();
    let mut fuel = fuel;
    loop {
        cur = match cur {
            Computation::Unit(v) => match konts.pop() {
                None => return Ok(EvalResult::Done { value: v, store }),
                Some(Value::Lam(x, body)) => {
                    if fuel == 0 {
                        return Ok(EvalResult::FuelExhausted);
                    }
                    fuel -= 1;
                    substitute(&body, &x, &v)
                }
                Some(Value::Var(x)) => unreachable!("closed evaluation met variable `{x}`"),
            },
            Computation::Bind(n, v) => {
                konts.push(v);
                *n
            }
            Computation::Get(l, x, body) => substitute(&body, &x, &store.lookup(l)),
            Computation::Set(l, v, body) => {
                store.update(l, v);
                *body
            }
        };
    }
}

/// Every field `<l: d>` of `sigma` is derivable for the stored value at `l`.
pub fn store_satisfies(s: &Store, sigma: &NormalType, b: &Bounds) -> bool {
    sigma.conjuncts().iter().all(|a| match a {
        Atom::Field(l, d) => {
            derive_search(&Judgment::new(Context::new(), Term::Value(s.lookup(*l)), d.clone()), b).is_some()
        }
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_computation, parse_type};

    fn ty(s: &str) -> NormalType {
        parse_type(s).unwrap().normalize()
    }

    fn b() -> Bounds {
        Bounds::new(3, 2, BTreeSet::from([Location(0)]))
    }

    fn id() -> Value {
        lam("x", unit(var("x")))
    }

    fn omega() -> Computation {
        let delta = lam("x", bind(unit(var("x")), var("x")));
        bind(unit(delta.clone()), delta)
    }

    #[test]
    fn interpret_clauses() {
        let e = Env::new().extend("x", PrincipalFilter::new(ty("wD -> wT")));
        assert_eq!(interpret(&Term::Value(var("x")), &e), Denotation::Principal(e.lookup("x")));
        assert_eq!(
            interpret(&Term::Comp(unit(var("x"))), &e),
            Denotation::Unit(Box::new(Denotation::Principal(e.lookup("x"))))
        );
        assert_eq!(
            interpret(&Term::Value(id()), &e),
            Denotation::Abs("x".into(), unit(var("x")), e.clone())
        );
    }

    #[test]
    fn identity_membership() {
        let d = interpret(&Term::Value(id()), &Env::new());
        let t = parse_type("(wD -> wS -> wD * wS) -> wS -> (wD -> wS -> wD * wS) * wS").unwrap();
        assert!(member_den(&d, &t, &Bounds::new(4, 2, BTreeSet::from([Location(0)]))).unwrap());
        assert!(member_den(&d, &parse_type("wD").unwrap(), &b()).unwrap());
        assert!(member_den(&d, &parse_type("wT").unwrap(), &b()).is_err());
    }

    #[test]
    fn get_membership_matches_search() {
        let l0 = Location(0);
        let m = get(l0, "x", unit(var("x")));
        let delta = ty("wD -> wS -> wD * wS");
        let s = NormalType::field(l0, delta.clone());
        let target = NormalType::store_arrow(s.clone(), NormalType::prod(delta, s));
        let bb = Bounds::new(4, 2, BTreeSet::from([l0]));
        let d = interpret(&Term::Comp(m.clone()), &Env::new());
        assert!(d.member(&target, &bb));
        let j = Judgment::new(Context::new(), Term::Comp(m), target);
        assert!(derive_search(&j, &bb).is_some());
    }

    #[test]
    fn type_members_at_depth_zero() {
        let s = type_members(&Term::Comp(unit(id())), &Context::new(), 0, &b()).unwrap();
        assert_eq!(s.expand().unwrap(), vec![NormalType::omega(Sort::Computation)]);
    }

    #[test]
    fn laws_from_the_examples() {
        let k = 2;
        let one = LawInstance::LeftUnit { v: lam("y", unit(var("y"))), x: "x".into(), m: unit(var("x")) };
        assert_eq!(check_law_instance(&one, k, &b()), Ok(true));
        let two = LawInstance::RightUnit { m: unit(lam("y", unit(var("y")))), x: "x".into() };
        assert_eq!(check_law_instance(&two, k, &b()), Ok(true));
        let four = LawInstance::GetBind { loc: Location(0), x: "x".into(), m: unit(var("x")), w: id() };
        assert_eq!(check_law_instance(&four, k, &b()), Ok(true));
    }

    #[test]
    fn law_side_conditions_are_checked() {
        let bad = LawInstance::GetBind { loc: Location(0), x: "x".into(), m: unit(var("x")), w: var("x") };
        assert!(matches!(check_law_instance(&bad, 1, &b()), Err(LawError::SideCondition { law: 4, .. })));
        let bad = LawInstance::Assoc {
            l: unit(id()),
            x: "x".into(),
            m: unit(var("x")),
            y: "y".into(),
            n: unit(var("x")),
        };
        assert!(matches!(bad.sides(), Err(LawError::SideCondition { law: 3, .. })));
    }

    #[test]
    fn rewriting() {
        let m = parse_computation(r"[\x. [x]] >>= (\y. [y])").unwrap();
        let r = rewrite_normalize(&m, 10);
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.steps[0].law, 1);
        assert_eq!(r.normal_form, unit(id()));

        let m = parse_computation(r"([a] >>= (\x. [x] >>= f)) >>= (\y. [y] >>= g)").unwrap();
        assert_eq!(step_comp(&m, &[1, 3, 4, 5]).map(|(l, _)| l), Some(3));

        let r = rewrite_normalize(&omega(), 25);
        assert!(r.exhausted);
        assert_eq!(r.steps.len(), 25);
        assert!(r.steps[1].result.alpha_eq(&omega()));
    }

    #[test]
    fn rewriting_renames_to_avoid_capture() {
        // x is free in W, so the get binder must move out of the way
        let inner = bind(get(Location(0), "x", unit(var("x"))), lam("y", unit(var("x"))));
        let r = contract(&inner, 4).unwrap();
        let Computation::Get(_, x, body) = &r else { panic!() };
        assert_ne!(x, "x");
        assert!(body.is_free("x"));
    }

    #[test]
    fn store_evaluation() {
        let z = lam("z", unit(var("z")));
        let m = set(Location(0), z.clone(), get(Location(0), "x", unit(var("x"))));
        let r = eval_with_store(&m, &Store::new(), 10).unwrap();
        assert_eq!(r, EvalResult::Done { value: z.clone(), store: Store::new().with(Location(0), z) });
        assert_eq!(eval_with_store(&omega(), &Store::new(), 50).unwrap(), EvalResult::FuelExhausted);
        assert_eq!(
            eval_with_store(&unit(id()), &Store::new(), 0).unwrap(),
            EvalResult::Done { value: id(), store: Store::new() }
        );
        assert!(matches!(eval_with_store(&unit(var("q")), &Store::new(), 1), Err(EvalError::Open(_))));
    }

    #[test]
    fn store_typing() {
        let s = Store::new().with(Location(0), id());
        assert!(store_satisfies(&s, &NormalType::omega(Sort::Store), &b()));
        let sigma = ty("<l0: wD -> wS -> wD * wS>");
        assert!(store_satisfies(&s, &sigma, &b()));
    }
}
