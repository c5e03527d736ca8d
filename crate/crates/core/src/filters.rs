//! Filters over the four type theories.
//!
//! A filter is a set of types closed under `&` and upward under `<=`. Finite
//! ones are principal, `↑phi`, and are decided by [`leq_nf`]. The four
//! monadic operations build filters from intensional generator sets that
//! quantify over infinitely many intermediate types; membership is decided
//! by existential search over bounded witness sets ([`Bounds`]).
//!
//! Two routes are provided. [`member_unit`], [`member_bind`], [`member_get`]
//! and [`member_set`] check a target conjunct by conjunct and pick the best
//! witness directly where one exists. [`member_generated`] is the literal
//! reading: enumerate generators within bounds and look for at most
//! `witness_width` of them whose meet lies below the target.

use std::collections::BTreeSet;

use crate::subtyping::{
    atom_is_top, class_representatives, invert_nf, is_top, leq_nf, lookup, project,
};
use crate::syntax::Location;
use crate::types::{store_domain, Atom, NormalType, Sort, TypeError, TypeExpr};

/// Limits on existential witnesses.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bounds {
    /// Largest depth of a witness type.
    pub witness_depth: usize,
    /// Largest number of conjuncts at any level of a witness type, and the
    /// number of generators combined by the literal search.
    pub witness_width: usize,
    pub locs: BTreeSet<Location>,
}

pub const DEFAULT_WIDTH: usize = 2;

impl Bounds {
    pub fn new(witness_depth: usize, witness_width: usize, locs: BTreeSet<Location>) -> Self {
        assert!(witness_width >= 1, "witness width must be at least 1");
        Bounds { witness_depth, witness_width, locs }
    }

    /// Defaults for a query about `target`: width 2, depth one more than the
    /// target's, and the target's locations plus `l0` and `extra`.
    pub fn for_target(target: &NormalType, extra: &BTreeSet<Location>) -> Self {
        let mut locs = BTreeSet::from([Location(0)]);
        target.locations(&mut locs);
        locs.extend(extra.iter().copied());
        Bounds::new(target.depth() + 1, DEFAULT_WIDTH, locs)
    }

    /// Equivalence-class representatives of the witness types of `sort`.
    pub fn witnesses(&self, sort: Sort) -> Vec<NormalType> {
        class_representatives(sort, self.witness_depth, self.witness_width, &self.locs)
    }
}

/// Anything that denotes a filter and can answer membership.
pub trait DenHandle {
    fn sort(&self) -> Sort;
    fn member(&self, target: &NormalType, b: &Bounds) -> bool;
}

/// The principal filter `↑generator`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrincipalFilter {
    pub generator: NormalType,
}

impl PrincipalFilter {
    pub fn new(generator: NormalType) -> Self {
        PrincipalFilter { generator }
    }

    pub fn top(sort: Sort) -> Self {
        PrincipalFilter::new(NormalType::omega(sort))
    }

    pub fn sort(&self) -> Sort {
        self.generator.sort()
    }

    pub fn contains(&self, t: &NormalType) -> bool {
        self.generator.sort() == t.sort() && leq_nf(&self.generator, t)
    }
}

impl DenHandle for PrincipalFilter {
    fn sort(&self) -> Sort {
        self.generator.sort()
    }

    fn member(&self, target: &NormalType, _: &Bounds) -> bool {
        self.contains(target)
    }
}

pub fn member_principal(f: &PrincipalFilter, psi: &TypeExpr) -> Result<bool, TypeError> {
    let s = psi.sort()?;
    if s != f.sort() {
        return Err(TypeError::SortMismatch { left: f.sort(), right: s });
    }
    Ok(f.contains(&psi.normalize()))
}

/// `X · Y` for principal filters: `↑invert(fun, arg)`.
pub fn apply_principal(
    fun: &PrincipalFilter,
    arg: &PrincipalFilter,
) -> Result<PrincipalFilter, TypeError> {
    let want = match fun.sort() {
        Sort::Value => Sort::Value,
        Sort::Computation => Sort::Store,
        other => {
            return Err(TypeError::IllSorted { constructor: "filter application", expected: Sort::Value, found: other })
        }
    };
    if arg.sort() != want {
        return Err(TypeError::IllSorted { constructor: "filter application argument", expected: want, found: arg.sort() });
    }
    Ok(PrincipalFilter::new(invert_nf(&fun.generator, &arg.generator)))
}

/// `Y · {l}`: the value filter stored at `l`.
pub fn store_lookup(store: &PrincipalFilter, l: Location) -> PrincipalFilter {
    PrincipalFilter::new(lookup(&store.generator, l))
}

/// `Z[l ↦ X]`: strong update, dropping whatever `Z` said about `l`.
pub fn store_update(store: &PrincipalFilter, l: Location, v: &PrincipalFilter) -> PrincipalFilter {
    PrincipalFilter::new(update_nf(&store.generator, l, &v.generator))
}

pub fn update_nf(store: &NormalType, l: Location, payload: &NormalType) -> NormalType {
    let kept = without(store, l);
    kept.meet(&NormalType::field(l, payload.clone()))
}

/// The store type with every field at `l` removed.
pub fn without(store: &NormalType, l: Location) -> NormalType {
    NormalType::from_atoms(
        Sort::Store,
        store
            .conjuncts()
            .iter()
            .filter(|a| !matches!(a, Atom::Field(m, _) if *m == l))
            .cloned(),
    )
}

/// Result of projecting a result filter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Projection {
    Pair(PrincipalFilter, PrincipalFilter),
    /// The filter is `↑wC`, the divergent result.
    Bottom,
}

pub fn project_pair(c: &PrincipalFilter) -> Projection {
    match project(&c.generator) {
        Some((d, s)) => Projection::Pair(PrincipalFilter::new(d), PrincipalFilter::new(s)),
        None => Projection::Bottom,
    }
}

// ---------------------------------------------------------------------------
// Conjunct-wise membership

/// The store-arrow conjuncts of a computation target that are not top.
fn obligations(target: &NormalType) -> impl Iterator<Item = (&NormalType, &NormalType)> {
    target.conjuncts().iter().filter(|a| !atom_is_top(a)).map(|a| match a {
        Atom::StoreArrow(s, k) => (s, k),
        other => panic!("computation target with a {} conjunct", other.sort()),
    })
}

/// `Unit(d) ∋ s -> k`: with `k` reduced to `d* * s*`, iff `s <= s*` and
/// `d ∋ d*`.
pub fn member_unit_nf(d: &dyn DenHandle, target: &NormalType, b: &Bounds) -> bool {
    obligations(target).all(|(s, k)| match project(k) {
        Some((dv, ds)) => leq_nf(s, &ds) && d.member(&dv, b),
        None => true,
    })
}

/// `t >>= v ∋ s -> k` iff some witnesses `d', s'` have `t ∋ s -> d' * s'` and
/// `v ∋ d' -> s' -> k`.
pub fn member_bind_nf(t: &dyn DenHandle, v: &dyn DenHandle, target: &NormalType, b: &Bounds) -> bool {
    let (ds, ss) = (b.witnesses(Sort::Value), b.witnesses(Sort::Store));
    obligations(target).all(|(s, k)| {
        bind_witness(t, v, s, k, b, &ds, &ss).is_some()
    })
}

pub(crate) fn bind_witness(
    t: &dyn DenHandle,
    v: &dyn DenHandle,
    s: &NormalType,
    k: &NormalType,
    b: &Bounds,
    ds: &[NormalType],
    ss: &[NormalType],
) -> Option<(NormalType, NormalType)> {
    for d1 in ds {
        for s1 in ss {
            let first = NormalType::store_arrow(s.clone(), NormalType::prod(d1.clone(), s1.clone()));
            if !t.member(&first, b) {
                continue;
            }
            let cont = NormalType::arrow(d1.clone(), NormalType::store_arrow(s1.clone(), k.clone()));
            if v.member(&cont, b) {
                return Some((d1.clone(), s1.clone()));
            }
        }
    }
    None
}

/// `get_l(v) ∋ s -> k` iff `v ∋ s(l) -> s -> k`, where `s(l)` is the meet of
/// the payloads of `s` at `l`. No search is needed.
pub fn member_get_nf(l: Location, v: &dyn DenHandle, target: &NormalType, b: &Bounds) -> bool {
    obligations(target).all(|(s, k)| {
        let cont = NormalType::arrow(lookup(s, l), NormalType::store_arrow(s.clone(), k.clone()));
        v.member(&cont, b)
    })
}

/// `set_l(v, t) ∋ s -> k` iff some witness `d` has `v ∋ d` and
/// `t ∋ (<l: d> & s') -> k`, where `s'` is `s` without its fields at `l`.
pub fn member_set_nf(
    l: Location,
    v: &dyn DenHandle,
    t: &dyn DenHandle,
    target: &NormalType,
    b: &Bounds,
) -> bool {
    let ds = b.witnesses(Sort::Value);
    obligations(target).all(|(s, k)| set_witness(l, v, t, s, k, b, &ds).is_some())
}

pub(crate) fn set_witness(
    l: Location,
    v: &dyn DenHandle,
    t: &dyn DenHandle,
    s: &NormalType,
    k: &NormalType,
    b: &Bounds,
    ds: &[NormalType],
) -> Option<NormalType> {
    let rest = without(s, l);
    ds.iter()
        .find(|d| {
            v.member(d, b) && {
                let inner = NormalType::field(l, (*d).clone()).meet(&rest);
                t.member(&NormalType::store_arrow(inner, k.clone()), b)
            }
        })
        .cloned()
}

fn comp_target(target: &TypeExpr) -> Result<NormalType, TypeError> {
    match target.sort()? {
        Sort::Computation => Ok(target.normalize()),
        found => Err(TypeError::IllSorted { constructor: "computation filter", expected: Sort::Computation, found }),
    }
}

pub fn member_unit(d: &dyn DenHandle, target: &TypeExpr, b: &Bounds) -> Result<bool, TypeError> {
    Ok(member_unit_nf(d, &comp_target(target)?, b))
}

pub fn member_bind(
    t: &dyn DenHandle,
    v: &dyn DenHandle,
    target: &TypeExpr,
    b: &Bounds,
) -> Result<bool, TypeError> {
    Ok(member_bind_nf(t, v, &comp_target(target)?, b))
}

pub fn member_get(l: Location, v: &dyn DenHandle, target: &TypeExpr, b: &Bounds) -> Result<bool, TypeError> {
    Ok(member_get_nf(l, v, &comp_target(target)?, b))
}

pub fn member_set(
    l: Location,
    v: &dyn DenHandle,
    t: &dyn DenHandle,
    target: &TypeExpr,
    b: &Bounds,
) -> Result<bool, TypeError> {
    Ok(member_set_nf(l, v, t, &comp_target(target)?, b))
}

// ---------------------------------------------------------------------------
// Literal generator search

/// An intensional generator set.
pub enum GeneratorSpec<'a> {
    /// `{s -> d * s | d ∈ X}`
    UnitOf(&'a dyn DenHandle),
    /// `{s -> d'' * s'' | ∃ d', s'. s -> d' * s' ∈ X, d' -> s' -> d'' * s'' ∈ Y}`
    BindOf(&'a dyn DenHandle, &'a dyn DenHandle),
    /// `{(<l: d> & s) -> k | d -> s -> k ∈ X}`
    GetOf(Location, &'a dyn DenHandle),
    /// `{s' -> k | ∃ d ∈ X. (<l: d> & s') -> k ∈ Y, l ∉ dom(s')}`
    SetOf(Location, &'a dyn DenHandle, &'a dyn DenHandle),
    Explicit(Vec<NormalType>),
}

impl GeneratorSpec<'_> {
    /// Every generator whose quantified types are drawn from the witness
    /// sets of `b`.
    pub fn generators(&self, b: &Bounds) -> Vec<NormalType> {
        let ds = b.witnesses(Sort::Value);
        let ss = b.witnesses(Sort::Store);
        let ks = b.witnesses(Sort::Result);
        let sa = |s: &NormalType, k: NormalType| NormalType::store_arrow(s.clone(), k);
        let pr = |d: &NormalType, s: &NormalType| NormalType::prod(d.clone(), s.clone());
        let mut out = Vec::new();
        match self {
            GeneratorSpec::Explicit(gs) => {
                out.extend(gs.iter().filter(|g| g.depth() <= b.witness_depth).cloned());
            }
            GeneratorSpec::UnitOf(x) => {
                for d in ds.iter().filter(|d| x.member(d, b)) {
                    for s in &ss {
                        out.push(sa(s, pr(d, s)));
                    }
                }
            }
            GeneratorSpec::BindOf(x, y) => {
                for s in &ss {
                    let mids: Vec<(NormalType, NormalType)> = ds
                        .iter()
                        .flat_map(|d1| ss.iter().map(move |s1| (d1.clone(), s1.clone())))
                        .filter(|(d1, s1)| x.member(&sa(s, pr(d1, s1)), b))
                        .collect();
                    for d2 in &ds {
                        for s2 in &ss {
                            let k = pr(d2, s2);
                            let ok = mids.iter().any(|(d1, s1)| {
                                y.member(&NormalType::arrow(d1.clone(), sa(s1, k.clone())), b)
                            });
                            if ok {
                                out.push(sa(s, k));
                            }
                        }
                    }
                }
            }
            GeneratorSpec::GetOf(l, x) => {
                for d in &ds {
                    for s in &ss {
                        for k in &ks {
                            let cont = NormalType::arrow(d.clone(), sa(s, k.clone()));
                            if x.member(&cont, b) {
                                let dom = NormalType::field(*l, d.clone()).meet(s);
                                out.push(sa(&dom, k.clone()));
                            }
                        }
                    }
                }
            }
            GeneratorSpec::SetOf(l, x, y) => {
                let vals: Vec<&NormalType> = ds.iter().filter(|d| x.member(d, b)).collect();
                for s in ss.iter().filter(|s| !store_domain(s).contains(l)) {
                    for k in &ks {
                        let ok = vals.iter().any(|d| {
                            let dom = NormalType::field(*l, (*d).clone()).meet(s);
                            y.member(&sa(&dom, k.clone()), b)
                        });
                        if ok {
                            out.push(sa(s, k.clone()));
                        }
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Literal bounded membership: some meet of at most `witness_width`
/// generators lies below the target. Always true on a top target.
pub fn member_generated(g: &GeneratorSpec<'_>, target: &NormalType, b: &Bounds) -> bool {
    if is_top(target) {
        return true;
    }
    let gens = g.generators(b);
    fn search(gens: &[NormalType], from: usize, acc: &NormalType, left: usize, target: &NormalType) -> bool {
        if left == 0 {
            return false;
        }
        (from..gens.len()).any(|i| {
            let m = acc.meet(&gens[i]);
            leq_nf(&m, target) || search(gens, i + 1, &m, left - 1, target)
        })
    }
    search(&gens, 0, &NormalType::omega(target.sort()), b.witness_width, target)
}
