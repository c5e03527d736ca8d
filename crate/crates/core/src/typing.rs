//! The intersection type assignment system.
//!
//! Judgments are `G |- P : phi` with `P` a value (typed by a value type) or a
//! computation (typed by a computation type). Rules:
//!
//! ```text
//! var    G, x:d |- x : d
//! lam    G, x:d |- M : t                       =>  G |- \x. M : d -> t
//! unit   G |- V : d                            =>  G |- [V] : s -> d * s
//! bind   G |- M : s -> d' * s'
//!        G |- V : d' -> s' -> d'' * s''        =>  G |- M >>= V : s -> d'' * s''
//! get    G |- \x. M : d -> s -> k              =>  G |- get(l, \x. M) : (<l: d> & s) -> k
//! set    G |- V : d   G |- M : (<l: d> & s) -> k,  l not in dom(s)
//!                                              =>  G |- set(l, V, M) : s -> k
//! omega  G |- P : w
//! inter  G |- P : a   G |- P : b               =>  G |- P : a & b
//! sub    G |- P : a   a <= b                   =>  G |- P : b
//! ```
//!
//! [`derive_search`] looks for derivations in a normal form: the target is
//! split into conjuncts, top conjuncts come from `omega`, every other conjunct
//! is proved by the rule for the subject's head followed by at most one `sub`.
//! The existential types of `bind` and `set` range over the witness sets of a
//! [`Bounds`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::filters::{without, Bounds};
use crate::grammar::{parse_term, parse_type};
use crate::subtyping::{atom_is_top, leq_nf, lookup, project};
use crate::syntax::{Computation, Location, Term, TermSort, Value};
use crate::types::{enumerate_atoms, store_domain, Atom, NormalType, Sort, TypeError, MAX_EXPANDED_ATOMS};

/// Variable typings `x1: d1, ..., xn: dn`.
pub type Context = BTreeMap<String, NormalType>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Judgment {
    pub ctx: Context,
    pub subject: Term,
    pub ty: NormalType,
}

impl Judgment {
    pub fn new(ctx: Context, subject: Term, ty: NormalType) -> Self {
        Judgment { ctx, subject, ty }
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ctx: Vec<String> = self.ctx.iter().map(|(x, d)| format!("{x}: {d}")).collect();
        write!(f, "{} |- {} : {}", ctx.join(", "), self.subject, self.ty)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Var,
    Lam,
    Unit,
    Bind,
    Get,
    Set,
    Omega,
    Inter,
    Sub,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::Var,
        Rule::Lam,
        Rule::Unit,
        Rule::Bind,
        Rule::Get,
        Rule::Set,
        Rule::Omega,
        Rule::Inter,
        Rule::Sub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Var => "var",
            Rule::Lam => "lam",
            Rule::Unit => "unit",
            Rule::Bind => "bind",
            Rule::Get => "get",
            Rule::Set => "set",
            Rule::Omega => "omega",
            Rule::Inter => "inter",
            Rule::Sub => "sub",
        }
    }

    pub fn from_name(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Rule,
    pub conclusion: Judgment,
    pub premises: Vec<Derivation>,
    /// For `sub`, the premise type.
    pub side: Option<NormalType>,
}

impl Derivation {
    fn leaf(rule: Rule, conclusion: Judgment) -> Self {
        Derivation { rule, conclusion, premises: Vec::new(), side: None }
    }

    fn node(rule: Rule, conclusion: Judgment, premises: Vec<Derivation>) -> Self {
        Derivation { rule, conclusion, premises, side: None }
    }

    /// Wraps `self` in a `sub` step to `ty`, unless it already concludes `ty`.
    fn weaken(self, ty: &NormalType) -> Self {
        if &self.conclusion.ty == ty {
            return self;
        }
        let side = self.conclusion.ty.clone();
        let conclusion = Judgment { ty: ty.clone(), ..self.conclusion.clone() };
        Derivation { rule: Rule::Sub, conclusion, premises: vec![self], side: Some(side) }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }
}

// ---------------------------------------------------------------------------
// Checking

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid derivation at {path} ({rule}): {msg}")]
pub struct CheckError {
    /// Premise indices from the root, written `root/0/1`.
    pub path: String,
    pub rule: Rule,
    pub msg: String,
}

pub fn check_derivation(d: &Derivation) -> Result<(), CheckError> {
    check_at(d, &mut vec![])
}

fn check_at(d: &Derivation, path: &mut Vec<usize>) -> Result<(), CheckError> {
    check_node(d).map_err(|msg| CheckError {
        path: render_path(path),
        rule: d.rule,
        msg,
    })?;
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        check_at(p, path)?;
        path.pop();
    }
    Ok(())
}

fn render_path(path: &[usize]) -> String {
    let mut s = String::from("root");
    for i in path {
        s.push('/');
        s.push_str(&i.to_string());
    }
    s
}

fn arity(d: &Derivation, n: usize) -> Result<(), String> {
    if d.premises.len() == n {
        Ok(())
    } else {
        Err(format!("expected {n} premise(s), found {}", d.premises.len()))
    }
}

fn single(t: &NormalType) -> Option<&Atom> {
    match t.conjuncts() {
        [a] => Some(a),
        _ => None,
    }
}

fn as_arrow(t: &NormalType) -> Option<(&NormalType, &NormalType)> {
    match single(t) {
        Some(Atom::Arrow(d, c)) => Some((d, c)),
        _ => None,
    }
}

fn as_store_arrow(t: &NormalType) -> Option<(&NormalType, &NormalType)> {
    match single(t) {
        Some(Atom::StoreArrow(s, k)) => Some((s, k)),
        _ => None,
    }
}

fn as_prod(t: &NormalType) -> Option<(&NormalType, &NormalType)> {
    match single(t) {
        Some(Atom::Prod(d, s)) => Some((d, s)),
        _ => None,
    }
}

/// `s -> d * s'` split into its three parts.
fn as_comp_shape(t: &NormalType) -> Option<(&NormalType, &NormalType, &NormalType)> {
    let (s, k) = as_store_arrow(t)?;
    let (d, s2) = as_prod(k)?;
    Some((s, d, s2))
}

fn expect_eq<T: PartialEq + fmt::Display>(what: &str, found: &T, want: &T) -> Result<(), String> {
    if found == want {
        Ok(())
    } else {
        Err(format!("{what}: expected `{want}`, found `{found}`"))
    }
}

fn check_node(d: &Derivation) -> Result<(), String> {
    let j = &d.conclusion;
    let want_sort = match j.subject {
        Term::Value(_) => Sort::Value,
        Term::Comp(_) => Sort::Computation,
    };
    if j.ty.sort() != want_sort {
        return Err(format!("a {} typed with a {} type", j.subject.sort(), j.ty.sort()));
    }
    if let Some((x, t)) = j.ctx.iter().find(|(_, t)| t.sort() != Sort::Value) {
        return Err(format!("context entry `{x}` has a {} type", t.sort()));
    }
    let same_ctx = |p: &Derivation| -> Result<(), String> {
        if p.conclusion.ctx == j.ctx {
            Ok(())
        } else {
            Err("premise context differs from the conclusion's".into())
        }
    };
    let subject = |p: &Derivation, want: &Term| expect_eq("premise subject", &p.conclusion.subject, want);
    if d.rule != Rule::Sub && d.side.is_some() {
        return Err("only `sub` carries a side type".into());
    }
    match d.rule {
        Rule::Omega => {
            arity(d, 0)?;
            if !j.ty.is_omega() {
                return Err(format!("`omega` concludes `{}`, not a top type", j.ty));
            }
        }
        Rule::Inter => {
            arity(d, 2)?;
            for p in &d.premises {
                same_ctx(p)?;
                subject(p, &j.subject)?;
            }
            let meet = d.premises[0].conclusion.ty.meet(&d.premises[1].conclusion.ty);
            expect_eq("intersection", &j.ty, &meet)?;
        }
        Rule::Sub => {
            arity(d, 1)?;
            let p = &d.premises[0];
            same_ctx(p)?;
            subject(p, &j.subject)?;
            let side = d.side.as_ref().ok_or("`sub` without a side type")?;
            expect_eq("side type", side, &p.conclusion.ty)?;
            if side.sort() != j.ty.sort() || !leq_nf(side, &j.ty) {
                return Err(format!("`{side}` is not a subtype of `{}`", j.ty));
            }
        }
        Rule::Var => {
            arity(d, 0)?;
            let Term::Value(Value::Var(x)) = &j.subject else {
                return Err("`var` on a non-variable".into());
            };
            match j.ctx.get(x) {
                Some(t) => expect_eq("variable type", &j.ty, t)?,
                None => return Err(format!("`{x}` is not in the context")),
            }
        }
        Rule::Lam => {
            arity(d, 1)?;
            let Term::Value(Value::Lam(x, body)) = &j.subject else {
                return Err("`lam` on a non-abstraction".into());
            };
            let (dom, cod) = as_arrow(&j.ty).ok_or("`lam` must conclude a single arrow")?;
            let p = &d.premises[0];
            let mut ctx = j.ctx.clone();
            ctx.insert(x.clone(), dom.clone());
            if p.conclusion.ctx != ctx {
                return Err(format!("premise context must extend the conclusion's with `{x}: {dom}`"));
            }
            subject(p, &Term::Comp((**body).clone()))?;
            expect_eq("body type", &p.conclusion.ty, cod)?;
        }
        Rule::Unit => {
            arity(d, 1)?;
            let Term::Comp(Computation::Unit(v)) = &j.subject else {
                return Err("`unit` on a non-unit".into());
            };
            let (s, dv, s2) = as_comp_shape(&j.ty).ok_or("`unit` must conclude `s -> d * s`")?;
            expect_eq("output store", s2, s)?;
            let p = &d.premises[0];
            same_ctx(p)?;
            subject(p, &Term::Value(v.clone()))?;
            expect_eq("value type", &p.conclusion.ty, dv)?;
        }
        Rule::Bind => {
            arity(d, 2)?;
            let Term::Comp(Computation::Bind(m, v)) = &j.subject else {
                return Err("`bind` on a non-bind".into());
            };
            let (s, d2, s2) = as_comp_shape(&j.ty).ok_or("`bind` must conclude `s -> d'' * s''`")?;
            let (pm, pv) = (&d.premises[0], &d.premises[1]);
            same_ctx(pm)?;
            same_ctx(pv)?;
            subject(pm, &Term::Comp((**m).clone()))?;
            subject(pv, &Term::Value(v.clone()))?;
            let (s0, d1, s1) = as_comp_shape(&pm.conclusion.ty)
                .ok_or("first premise must have type `s -> d' * s'`")?;
            expect_eq("first premise input store", s0, s)?;
            let want = NormalType::arrow(
                d1.clone(),
                NormalType::store_arrow(s1.clone(), NormalType::prod(d2.clone(), s2.clone())),
            );
            expect_eq("second premise type", &pv.conclusion.ty, &want)?;
        }
        Rule::Get => {
            arity(d, 1)?;
            let Term::Comp(Computation::Get(l, x, body)) = &j.subject else {
                return Err("`get` on a non-get".into());
            };
            let p = &d.premises[0];
            same_ctx(p)?;
            subject(p, &Term::Value(Value::Lam(x.clone(), body.clone())))?;
            let (dv, rest) = as_arrow(&p.conclusion.ty).ok_or("premise must have type `d -> s -> k`")?;
            let (s, k) = as_store_arrow(rest).ok_or("premise must have type `d -> s -> k`")?;
            let want = NormalType::store_arrow(NormalType::field(*l, dv.clone()).meet(s), k.clone());
            expect_eq("`get` type", &j.ty, &want)?;
        }
        Rule::Set => {
            arity(d, 2)?;
            let Term::Comp(Computation::Set(l, v, m)) = &j.subject else {
                return Err("`set` on a non-set".into());
            };
            let (s, k) = as_store_arrow(&j.ty).ok_or("`set` must conclude `s -> k`")?;
            if store_domain(s).contains(l) {
                return Err(format!("side condition violated: {l} is in dom(`{s}`)"));
            }
            let (pv, pm) = (&d.premises[0], &d.premises[1]);
            same_ctx(pv)?;
            same_ctx(pm)?;
            subject(pv, &Term::Value(v.clone()))?;
            subject(pm, &Term::Comp((**m).clone()))?;
            let dv = &pv.conclusion.ty;
            let want = NormalType::store_arrow(NormalType::field(*l, dv.clone()).meet(s), k.clone());
            expect_eq("body type", &pm.conclusion.ty, &want)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Search

/// Bounded derivation search with memoised provability.
pub struct Search<'b> {
    bounds: &'b Bounds,
    witness_vals: Vec<NormalType>,
    witness_stores: Vec<NormalType>,
    memo: HashMap<(Context, Term, Atom), bool>,
}

impl<'b> Search<'b> {
    pub fn new(bounds: &'b Bounds) -> Self {
        Search {
            bounds,
            witness_vals: bounds.witnesses(Sort::Value),
            witness_stores: bounds.witnesses(Sort::Store),
            memo: HashMap::new(),
        }
    }

    pub fn bounds(&self) -> &Bounds {
        self.bounds
    }

    /// Whether `ctx |- t : ty` has a derivation within bounds.
    pub fn provable(&mut self, ctx: &Context, t: &Term, ty: &NormalType) -> bool {
        ty.conjuncts()
            .iter()
            .all(|a| atom_is_top(a) || self.provable_atom(ctx, t, a))
    }

    fn provable_atom(&mut self, ctx: &Context, t: &Term, a: &Atom) -> bool {
        let key = (ctx.clone(), t.clone(), a.clone());
        if let Some(&r) = self.memo.get(&key) {
            return r;
        }
        let r = self.plan(ctx, t, a).is_some();
        self.memo.insert(key, r);
        r
    }

    /// The rule instance proving a non-top atom, if any.
    fn plan(&mut self, ctx: &Context, t: &Term, a: &Atom) -> Option<Plan> {
        match (t, a) {
            (Term::Value(Value::Var(x)), _) => {
                let dx = ctx.get(x)?;
                leq_nf(dx, &NormalType::atom(a.clone())).then_some(Plan::Var)
            }
            (Term::Value(Value::Lam(x, body)), Atom::Arrow(d, tau)) => {
                let mut inner = ctx.clone();
                inner.insert(x.clone(), d.clone());
                self.provable(&inner, &Term::Comp((**body).clone()), tau).then_some(Plan::Lam)
            }
            (Term::Comp(m), Atom::StoreArrow(s, k)) => {
                let (dk, sk) = project(k)?;
                match m {
                    Computation::Unit(v) => {
                        (leq_nf(s, &sk) && self.provable(ctx, &Term::Value(v.clone()), &dk))
                            .then_some(Plan::Unit { d: dk, s: s.clone() })
                    }
                    Computation::Bind(m, v) => {
                        let mt = Term::Comp((**m).clone());
                        let vt = Term::Value(v.clone());
                        let out = NormalType::prod(dk.clone(), sk.clone());
                        for d1 in self.witness_vals.clone() {
                            for s1 in self.witness_stores.clone() {
                                let first = NormalType::store_arrow(
                                    s.clone(),
                                    NormalType::prod(d1.clone(), s1.clone()),
                                );
                                if !self.provable(ctx, &mt, &first) {
                                    continue;
                                }
                                let cont = NormalType::arrow(
                                    d1.clone(),
                                    NormalType::store_arrow(s1.clone(), out.clone()),
                                );
                                if self.provable(ctx, &vt, &cont) {
                                    return Some(Plan::Bind { first, cont, s: s.clone(), out });
                                }
                            }
                        }
                        None
                    }
                    Computation::Get(l, x, body) => {
                        let dl = lookup(s, *l);
                        let fun = NormalType::arrow(dl, NormalType::store_arrow(s.clone(), k.clone()));
                        let vt = Term::Value(Value::Lam(x.clone(), body.clone()));
                        self.provable(ctx, &vt, &fun).then_some(Plan::Get { fun })
                    }
                    Computation::Set(l, v, m) => {
                        let rest = without(s, *l);
                        let vt = Term::Value(v.clone());
                        let mt = Term::Comp((**m).clone());
                        for d in self.witness_vals.clone() {
                            if !self.provable(ctx, &vt, &d) {
                                continue;
                            }
                            let body = NormalType::store_arrow(
                                NormalType::field(*l, d.clone()).meet(&rest),
                                k.clone(),
                            );
                            if self.provable(ctx, &mt, &body) {
                                return Some(Plan::Set { d, body, concl: NormalType::store_arrow(rest, k.clone()) });
                            }
                        }
                        None
                    }
                }
            }
            _ => None,
        }
    }

    /// Builds a derivation concluding exactly `ctx |- t : ty`.
    pub fn derive(&mut self, ctx: &Context, t: &Term, ty: &NormalType) -> Option<Derivation> {
        let j = |ty: NormalType| Judgment::new(ctx.clone(), t.clone(), ty);
        let hard: Vec<&Atom> = ty.conjuncts().iter().filter(|a| !atom_is_top(a)).collect();
        let mut parts = Vec::new();
        for a in &hard {
            parts.push(self.derive_atom(ctx, t, a)?);
        }
        let mut it = parts.into_iter();
        let combined = match it.next() {
            None => Derivation::leaf(Rule::Omega, j(NormalType::omega(ty.sort()))),
            Some(first) => it.fold(first, |acc, p| {
                let meet = acc.conclusion.ty.meet(&p.conclusion.ty);
                Derivation::node(Rule::Inter, j(meet), vec![acc, p])
            }),
        };
        Some(combined.weaken(ty))
    }

    fn derive_atom(&mut self, ctx: &Context, t: &Term, a: &Atom) -> Option<Derivation> {
        let target = NormalType::atom(a.clone());
        let j = |ty: NormalType| Judgment::new(ctx.clone(), t.clone(), ty);
        let d = match self.plan(ctx, t, a)? {
            Plan::Var => {
                let Term::Value(Value::Var(x)) = t else { unreachable!() };
                Derivation::leaf(Rule::Var, j(ctx[x].clone()))
            }
            Plan::Lam => {
                let (Term::Value(Value::Lam(x, body)), Atom::Arrow(dom, tau)) = (t, a) else {
                    unreachable!()
                };
                let mut inner = ctx.clone();
                inner.insert(x.clone(), dom.clone());
                let p = self.derive(&inner, &Term::Comp((**body).clone()), tau)?;
                Derivation::node(Rule::Lam, j(target.clone()), vec![p])
            }
            Plan::Unit { d, s } => {
                let Term::Comp(Computation::Unit(v)) = t else { unreachable!() };
                let p = self.derive(ctx, &Term::Value(v.clone()), &d)?;
                let ty = NormalType::store_arrow(s.clone(), NormalType::prod(d, s));
                Derivation::node(Rule::Unit, j(ty), vec![p])
            }
            Plan::Bind { first, cont, s, out } => {
                let Term::Comp(Computation::Bind(m, v)) = t else { unreachable!() };
                let pm = self.derive(ctx, &Term::Comp((**m).clone()), &first)?;
                let pv = self.derive(ctx, &Term::Value(v.clone()), &cont)?;
                Derivation::node(Rule::Bind, j(NormalType::store_arrow(s, out)), vec![pm, pv])
            }
            Plan::Get { fun } => {
                let Term::Comp(Computation::Get(l, x, body)) = t else { unreachable!() };
                let vt = Term::Value(Value::Lam(x.clone(), body.clone()));
                let p = self.derive(ctx, &vt, &fun)?;
                let (dl, rest) = as_arrow(&fun).unwrap();
                let (s, k) = as_store_arrow(rest).unwrap();
                let ty = NormalType::store_arrow(NormalType::field(*l, dl.clone()).meet(s), k.clone());
                Derivation::node(Rule::Get, j(ty), vec![p])
            }
            Plan::Set { d, body, concl } => {
                let Term::Comp(Computation::Set(_, v, m)) = t else { unreachable!() };
                let pv = self.derive(ctx, &Term::Value(v.clone()), &d)?;
                let pm = self.derive(ctx, &Term::Comp((**m).clone()), &body)?;
                Derivation::node(Rule::Set, j(concl), vec![pv, pm])
            }
        };
        Some(d.weaken(&target))
    }
}

enum Plan {
    Var,
    Lam,
    Unit { d: NormalType, s: NormalType },
    Bind { first: NormalType, cont: NormalType, s: NormalType, out: NormalType },
    Get { fun: NormalType },
    Set { d: NormalType, body: NormalType, concl: NormalType },
}

/// Searches for a derivation of `j`; `None` means none exists within `b`.
pub fn derive_search(j: &Judgment, b: &Bounds) -> Option<Derivation> {
    let want = match j.subject.sort() {
        TermSort::Value => Sort::Value,
        TermSort::Computation => Sort::Computation,
    };
    if j.ty.sort() != want {
        return None;
    }
    Search::new(b).derive(&j.ctx, &j.subject, &j.ty)
}

// ---------------------------------------------------------------------------
// Type sets

/// The types of one sort with depth at most `depth` over `locs` that satisfy
/// some predicate closed under `&` and containing every top-equivalent type.
/// Such a set is determined by which atoms it contains, so that is all it
/// stores: a normal type is a member iff each of its conjuncts is.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeSet {
    pub sort: Sort,
    pub depth: usize,
    pub locs: BTreeSet<Location>,
    pub atoms: BTreeSet<Atom>,
}

impl TypeSet {
    /// Collects the atoms accepted by `member`; top atoms are always in.
    pub fn from_predicate(
        sort: Sort,
        depth: usize,
        locs: &BTreeSet<Location>,
        mut member: impl FnMut(&Atom) -> bool,
    ) -> Result<Self, TypeError> {
        let atoms = enumerate_atoms(sort, depth, locs)?
            .into_iter()
            .filter(|a| atom_is_top(a) || member(a))
            .collect();
        Ok(TypeSet { sort, depth, locs: locs.clone(), atoms })
    }

    pub fn contains(&self, t: &NormalType) -> bool {
        let mut locs = BTreeSet::new();
        t.locations(&mut locs);
        t.sort() == self.sort
            && t.depth() <= self.depth
            && locs.is_subset(&self.locs)
            && t.conjuncts().iter().all(|a| self.atoms.contains(a))
    }

    /// Member atoms that are not top.
    pub fn nontrivial_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| !atom_is_top(a))
    }

    /// Every member, when there are few enough to list.
    pub fn expand(&self) -> Result<Vec<NormalType>, TypeError> {
        let atoms: Vec<&Atom> = self.atoms.iter().collect();
        if atoms.len() > MAX_EXPANDED_ATOMS {
            return Err(TypeError::TooLarge { sort: self.sort, depth: self.depth, atoms: atoms.len() });
        }
        let mut out: Vec<NormalType> = (0u64..(1 << atoms.len()))
            .map(|mask| {
                NormalType::from_atoms(
                    self.sort,
                    atoms.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| (*a).clone()),
                )
            })
            .collect();
        out.sort_by(|a, b| a.enumeration_key().cmp(&b.enumeration_key()));
        Ok(out)
    }

    /// Atoms in one set but not the other: `(only in self, only in other)`.
    pub fn diff<'a>(&'a self, other: &'a TypeSet) -> (Vec<&'a Atom>, Vec<&'a Atom>) {
        (
            self.atoms.difference(&other.atoms).collect(),
            other.atoms.difference(&self.atoms).collect(),
        )
    }
}

fn term_type_sort(t: &Term) -> Sort {
    match t.sort() {
        TermSort::Value => Sort::Value,
        TermSort::Computation => Sort::Computation,
    }
}

/// All types of depth at most `out_depth` (over the bound locations) that
/// `ctx |- t : _` derives within `b`.
pub fn enumerate_derivable_types(
    ctx: &Context,
    t: &Term,
    out_depth: usize,
    b: &Bounds,
) -> Result<TypeSet, TypeError> {
    let mut search = Search::new(b);
    TypeSet::from_predicate(term_type_sort(t), out_depth, &b.locs, |a| {
        search.provable(ctx, t, &NormalType::atom(a.clone()))
    })
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed derivation JSON at {path}: {msg}")]
    Shape { path: String, msg: String },
    #[error(transparent)]
    Syntax(#[from] serde_json::Error),
}

fn type_string(t: &NormalType) -> String {
    t.to_expr().to_string()
}

pub fn derivation_to_json(d: &Derivation) -> Json {
    let ctx: Map<String, Json> = d
        .conclusion
        .ctx
        .iter()
        .map(|(x, t)| (x.clone(), Json::String(type_string(t))))
        .collect();
    json!({
        "rule": d.rule.name(),
        "ctx": ctx,
        "term": d.conclusion.subject.to_string(),
        "type": type_string(&d.conclusion.ty),
        "premises": d.premises.iter().map(derivation_to_json).collect::<Vec<_>>(),
        "side": d.side.as_ref().map(type_string),
    })
}

pub fn derivation_to_string(d: &Derivation) -> String {
    serde_json::to_string_pretty(&derivation_to_json(d)).expect("JSON values always serialise")
}

pub fn derivation_from_str(s: &str) -> Result<Derivation, JsonError> {
    let v: Json = serde_json::from_str(s)?;
    derivation_from_json(&v, &mut vec![])
}

pub fn derivation_from_json(v: &Json, path: &mut Vec<usize>) -> Result<Derivation, JsonError> {
    let fail = |path: &[usize], msg: String| JsonError::Shape { path: render_path(path), msg };
    let obj = v.as_object().ok_or_else(|| fail(path, "expected an object".into()))?;
    let field = |k: &str| obj.get(k).ok_or_else(|| fail(path, format!("missing field `{k}`")));
    let text = |k: &str| -> Result<&str, JsonError> {
        field(k)?.as_str().ok_or_else(|| fail(path, format!("field `{k}` must be a string")))
    };
    let ty = |s: &str| -> Result<NormalType, JsonError> {
        let t = parse_type(s).map_err(|e| fail(path, e.to_string()))?;
        Ok(t.normalize())
    };

    let rule_name = text("rule")?;
    let rule = Rule::from_name(rule_name).ok_or_else(|| fail(path, format!("unknown rule `{rule_name}`")))?;
    let subject = parse_term(text("term")?).map_err(|e| fail(path, e.to_string()))?;
    let conclusion_ty = ty(text("type")?)?;
    let mut ctx = Context::new();
    let ctx_obj = field("ctx")?.as_object().ok_or_else(|| fail(path, "`ctx` must be an object".into()))?;
    for (x, t) in ctx_obj {
        let s = t.as_str().ok_or_else(|| fail(path, format!("type of `{x}` must be a string")))?;
        ctx.insert(x.clone(), ty(s)?);
    }
    let side = match obj.get("side") {
        None | Some(Json::Null) => None,
        Some(Json::String(s)) => Some(ty(s)?),
        Some(_) => return Err(fail(path, "`side` must be a string or null".into())),
    };
    let raw = field("premises")?.as_array().ok_or_else(|| fail(path, "`premises` must be an array".into()))?;
    let mut premises = Vec::with_capacity(raw.len());
    for (i, p) in raw.iter().enumerate() {
        path.push(i);
        premises.push(derivation_from_json(p, path)?);
        path.pop();
    }
    Ok(Derivation { rule, conclusion: Judgment::new(ctx, subject, conclusion_ty), premises, side })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_type;
    use crate::syntax::{get, lam, set, unit, var};

    fn ty(s: &str) -> NormalType {
        parse_type(s).unwrap().normalize()
    }

    fn b() -> Bounds {
        Bounds::new(3, 2, BTreeSet::from([Location(0)]))
    }

    fn id() -> Value {
        lam("x", unit(var("x")))
    }

    fn closed(t: Term, s: &str) -> Judgment {
        Judgment::new(Context::new(), t, ty(s))
    }

    #[test]
    fn omega_leaf_is_valid() {
        let j = closed(Term::Comp(unit(id())), "wT");
        let d = Derivation::leaf(Rule::Omega, j);
        assert!(check_derivation(&d).is_ok());
    }

    #[test]
    fn identity_by_hand() {
        let delta = ty("wD -> wS -> wD * wS");
        let sigma = ty("wS");
        let mut ctx = Context::new();
        ctx.insert("x".into(), delta.clone());
        let v = Derivation::leaf(Rule::Var, Judgment::new(ctx.clone(), Term::Value(var("x")), delta.clone()));
        let u_ty = NormalType::store_arrow(sigma.clone(), NormalType::prod(delta.clone(), sigma.clone()));
        let u = Derivation::node(Rule::Unit, Judgment::new(ctx, Term::Comp(unit(var("x"))), u_ty.clone()), vec![v]);
        let l = Derivation::node(
            Rule::Lam,
            Judgment::new(Context::new(), Term::Value(id()), NormalType::arrow(delta, u_ty)),
            vec![u],
        );
        assert_eq!(check_derivation(&l), Ok(()));
    }

    #[test]
    fn set_side_condition_is_enforced() {
        let l0 = Location(0);
        let delta = ty("wD -> wS -> wD * wS");
        let s = NormalType::field(l0, delta.clone());
        let k = ty("wD * wS");
        let m = unit(id());
        let term = set(l0, id(), m.clone());
        let pv = Derivation::leaf(Rule::Omega, Judgment::new(Context::new(), Term::Value(id()), ty("wD")));
        let body_ty = NormalType::store_arrow(NormalType::field(l0, ty("wD")).meet(&s), k.clone());
        let pm = Derivation::leaf(Rule::Omega, Judgment::new(Context::new(), Term::Comp(m), body_ty));
        let d = Derivation::node(
            Rule::Set,
            Judgment::new(Context::new(), Term::Comp(term), NormalType::store_arrow(s, k)),
            vec![pv, pm],
        );
        let e = check_derivation(&d).unwrap_err();
        assert_eq!(e.path, "root");
        assert!(e.msg.contains("side condition"), "{e}");
    }

    #[test]
    fn search_finds_identity_typing() {
        let j = closed(Term::Value(id()), "wD -> wS -> wD * wS");
        let d = derive_search(&j, &b()).expect("derivable");
        assert_eq!(d.conclusion, j);
        assert_eq!(check_derivation(&d), Ok(()));
    }

    #[test]
    fn search_uses_omega() {
        let j = closed(Term::Comp(unit(id())), "wT");
        let d = derive_search(&j, &b()).unwrap();
        assert_eq!(d.rule, Rule::Omega);
    }

    #[test]
    fn search_types_get() {
        let l0 = Location(0);
        let delta = ty("wD -> wS -> wD * wS");
        let s = NormalType::field(l0, delta.clone());
        let target = NormalType::store_arrow(s.clone(), NormalType::prod(delta.clone(), s.clone()));
        let j = Judgment::new(Context::new(), Term::Comp(get(l0, "x", unit(var("x")))), target);
        let d = derive_search(&j, &Bounds::new(4, 2, BTreeSet::from([l0]))).expect("derivable");
        assert_eq!(check_derivation(&d), Ok(()));
    }

    #[test]
    fn search_rejects_wrong_sort() {
        let j = closed(Term::Value(id()), "wT");
        assert!(derive_search(&j, &b()).is_none());
    }

    #[test]
    fn derivable_set_at_depth_zero() {
        let s = enumerate_derivable_types(&Context::new(), &Term::Comp(unit(id())), 0, &b()).unwrap();
        assert_eq!(s.expand().unwrap(), vec![NormalType::omega(Sort::Computation)]);
    }

    #[test]
    fn json_round_trip() {
        let j = closed(Term::Value(id()), "wD -> wS -> wD * wS");
        let d = derive_search(&j, &b()).unwrap();
        let text = derivation_to_string(&d);
        let back = derivation_from_str(&text).unwrap();
        assert_eq!(back, d);
        assert!(text.contains("\"rule\": \"lam\""));
    }

    #[test]
    fn json_errors_name_the_path() {
        let bad = r#"{"rule":"omega","ctx":{},"term":"[x]","type":"wT","premises":[{"rule":"nope"}],"side":null}"#;
        match derivation_from_str(bad) {
            Err(JsonError::Shape { path, .. }) => assert_eq!(path, "root/0"),
            other => panic!("{other:?}"),
        }
    }
}
