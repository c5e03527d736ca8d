//! The four intersection type languages: value types, store types, result
//! types and computation types.
//!
//! ```text
//! value        d ::= d -> t | d & d | wD
//! store        s ::= <l: d> | s & s | wS
//! result       k ::= d * s  | k & k | wC
//! computation  t ::= s -> k | t & t | wT
//! ```
//!
//! [`TypeExpr`] is the syntax tree as written. [`NormalType`] is the
//! canonical form used everywhere else: a sorted, duplicate-free list of
//! non-intersection, non-top conjuncts whose components are normal too. The
//! empty list stands for the top type of the sort.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subtyping;
use crate::syntax::Location;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    Value,
    Store,
    Result,
    Computation,
}

impl Sort {
    pub const ALL: [Sort; 4] = [Sort::Value, Sort::Store, Sort::Result, Sort::Computation];

    /// Concrete spelling of the top type of this sort.
    pub fn omega_name(self) -> &'static str {
        match self {
            Sort::Value => "wD",
            Sort::Store => "wS",
            Sort::Result => "wC",
            Sort::Computation => "wT",
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Sort::Value => "value",
            Sort::Store => "store",
            Sort::Result => "result",
            Sort::Computation => "computation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("ill-sorted {constructor}: expected a {expected} type, found a {found} type")]
    IllSorted { constructor: &'static str, expected: Sort, found: Sort },
    #[error("sort mismatch: {left} type against {right} type")]
    SortMismatch { left: Sort, right: Sort },
    #[error("enumeration of {sort} types at depth {depth} has {atoms} atoms; too many to expand")]
    TooLarge { sort: Sort, depth: usize, atoms: usize },
}

/// A type as written. Use the checked constructors to build one; they reject
/// ill-sorted combinations.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    Omega(Sort),
    /// `d -> t`, a value type.
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
    /// `<l: d>`, a store type.
    Field(Location, Box<TypeExpr>),
    /// `d * s`, a result type.
    Prod(Box<TypeExpr>, Box<TypeExpr>),
    /// `s -> k`, a computation type.
    StoreArrow(Box<TypeExpr>, Box<TypeExpr>),
    Inter(Box<TypeExpr>, Box<TypeExpr>),
}

fn expect(constructor: &'static str, t: &TypeExpr, expected: Sort) -> Result<(), TypeError> {
    let found = t.sort()?;
    if found == expected {
        Ok(())
    } else {
        Err(TypeError::IllSorted { constructor, expected, found })
    }
}

impl TypeExpr {
    pub fn omega(sort: Sort) -> Self {
        TypeExpr::Omega(sort)
    }

    pub fn arrow(dom: TypeExpr, cod: TypeExpr) -> Result<Self, TypeError> {
        expect("arrow domain", &dom, Sort::Value)?;
        expect("arrow codomain", &cod, Sort::Computation)?;
        Ok(TypeExpr::Arrow(Box::new(dom), Box::new(cod)))
    }

    pub fn field(loc: Location, payload: TypeExpr) -> Result<Self, TypeError> {
        expect("location field", &payload, Sort::Value)?;
        Ok(TypeExpr::Field(loc, Box::new(payload)))
    }

    pub fn prod(val: TypeExpr, store: TypeExpr) -> Result<Self, TypeError> {
        expect("product value", &val, Sort::Value)?;
        expect("product store", &store, Sort::Store)?;
        Ok(TypeExpr::Prod(Box::new(val), Box::new(store)))
    }

    pub fn store_arrow(dom: TypeExpr, cod: TypeExpr) -> Result<Self, TypeError> {
        expect("store arrow domain", &dom, Sort::Store)?;
        expect("store arrow codomain", &cod, Sort::Result)?;
        Ok(TypeExpr::StoreArrow(Box::new(dom), Box::new(cod)))
    }

    pub fn inter(a: TypeExpr, b: TypeExpr) -> Result<Self, TypeError> {
        let (sa, sb) = (a.sort()?, b.sort()?);
        if sa != sb {
            return Err(TypeError::SortMismatch { left: sa, right: sb });
        }
        Ok(TypeExpr::Inter(Box::new(a), Box::new(b)))
    }

    /// The sort of the type, validating every constructor on the way.
    pub fn sort(&self) -> Result<Sort, TypeError> {
        match self {
            TypeExpr::Omega(s) => Ok(*s),
            TypeExpr::Arrow(d, t) => {
                expect("arrow domain", d, Sort::Value)?;
                expect("arrow codomain", t, Sort::Computation)?;
                Ok(Sort::Value)
            }
            TypeExpr::Field(_, d) => {
                expect("location field", d, Sort::Value)?;
                Ok(Sort::Store)
            }
            TypeExpr::Prod(d, s) => {
                expect("product value", d, Sort::Value)?;
                expect("product store", s, Sort::Store)?;
                Ok(Sort::Result)
            }
            TypeExpr::StoreArrow(s, k) => {
                expect("store arrow domain", s, Sort::Store)?;
                expect("store arrow codomain", k, Sort::Result)?;
                Ok(Sort::Computation)
            }
            TypeExpr::Inter(a, b) => {
                let (sa, sb) = (a.sort()?, b.sort()?);
                if sa != sb {
                    return Err(TypeError::SortMismatch { left: sa, right: sb });
                }
                Ok(sa)
            }
        }
    }

    /// `(depth, size)`: depth counts `->`, `*` and `<l: _>` nesting (`&` adds
    /// nothing); size counts every constructor, `&` and the top types included.
    pub fn measure(&self) -> (usize, usize) {
        match self {
            TypeExpr::Omega(_) => (0, 1),
            TypeExpr::Field(_, d) => {
                let (dd, ds) = d.measure();
                (dd + 1, ds + 1)
            }
            TypeExpr::Arrow(a, b) | TypeExpr::Prod(a, b) | TypeExpr::StoreArrow(a, b) => {
                let (ad, asz) = a.measure();
                let (bd, bsz) = b.measure();
                (ad.max(bd) + 1, asz + bsz + 1)
            }
            TypeExpr::Inter(a, b) => {
                let (ad, asz) = a.measure();
                let (bd, bsz) = b.measure();
                (ad.max(bd), asz + bsz + 1)
            }
        }
    }

    pub fn normalize(&self) -> NormalType {
        normalize(self)
    }
}

pub fn sort_of(t: &TypeExpr) -> Result<Sort, TypeError> {
    t.sort()
}

pub fn measure(t: &TypeExpr) -> (usize, usize) {
    t.measure()
}

// ---------------------------------------------------------------------------
// Normal forms

/// A non-intersection, non-top type constructor with normal components.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Arrow(NormalType, NormalType),
    Field(Location, NormalType),
    Prod(NormalType, NormalType),
    StoreArrow(NormalType, NormalType),
}

impl Atom {
    pub fn sort(&self) -> Sort {
        match self {
            Atom::Arrow(..) => Sort::Value,
            Atom::Field(..) => Sort::Store,
            Atom::Prod(..) => Sort::Result,
            Atom::StoreArrow(..) => Sort::Computation,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Atom::Field(_, d) => d.depth() + 1,
            Atom::Arrow(a, b) | Atom::Prod(a, b) | Atom::StoreArrow(a, b) => {
                a.depth().max(b.depth()) + 1
            }
        }
    }

    pub fn to_expr(&self) -> TypeExpr {
        match self {
            Atom::Arrow(d, t) => TypeExpr::Arrow(Box::new(d.to_expr()), Box::new(t.to_expr())),
            Atom::Field(l, d) => TypeExpr::Field(*l, Box::new(d.to_expr())),
            Atom::Prod(d, s) => TypeExpr::Prod(Box::new(d.to_expr()), Box::new(s.to_expr())),
            Atom::StoreArrow(s, k) => {
                TypeExpr::StoreArrow(Box::new(s.to_expr()), Box::new(k.to_expr()))
            }
        }
    }

    pub fn locations(&self, out: &mut BTreeSet<Location>) {
        match self {
            Atom::Field(l, d) => {
                out.insert(*l);
                d.locations(out);
            }
            Atom::Arrow(a, b) | Atom::Prod(a, b) | Atom::StoreArrow(a, b) => {
                a.locations(out);
                b.locations(out);
            }
        }
    }
}

/// Canonical intersection of atoms. An empty conjunct list is the top type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalType {
    sort: Sort,
    conjuncts: Vec<Atom>,
}

impl NormalType {
    pub fn omega(sort: Sort) -> Self {
        NormalType { sort, conjuncts: Vec::new() }
    }

    pub fn atom(a: Atom) -> Self {
        NormalType { sort: a.sort(), conjuncts: vec![a] }
    }

    /// Builds the intersection of `atoms`; every atom must have sort `sort`.
    pub fn from_atoms(sort: Sort, atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut conjuncts: Vec<Atom> = atoms.into_iter().collect();
        debug_assert!(conjuncts.iter().all(|a| a.sort() == sort));
        conjuncts.sort();
        conjuncts.dedup();
        NormalType { sort, conjuncts }
    }

    pub fn arrow(dom: NormalType, cod: NormalType) -> Self {
        debug_assert!(dom.sort == Sort::Value && cod.sort == Sort::Computation);
        NormalType::atom(Atom::Arrow(dom, cod))
    }

    pub fn field(loc: Location, payload: NormalType) -> Self {
        debug_assert!(payload.sort == Sort::Value);
        NormalType::atom(Atom::Field(loc, payload))
    }

    pub fn prod(val: NormalType, store: NormalType) -> Self {
        debug_assert!(val.sort == Sort::Value && store.sort == Sort::Store);
        NormalType::atom(Atom::Prod(val, store))
    }

    pub fn store_arrow(dom: NormalType, cod: NormalType) -> Self {
        debug_assert!(dom.sort == Sort::Store && cod.sort == Sort::Result);
        NormalType::atom(Atom::StoreArrow(dom, cod))
    }

    pub fn sort(&self) -> Sort {
        self.sort
    }

    pub fn conjuncts(&self) -> &[Atom] {
        &self.conjuncts
    }

    /// Syntactically the top type (no conjuncts at all).
    pub fn is_omega(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn meet(&self, other: &NormalType) -> NormalType {
        debug_assert_eq!(self.sort, other.sort);
        let mut conjuncts = self.conjuncts.clone();
        conjuncts.extend(other.conjuncts.iter().cloned());
        NormalType::from_atoms(self.sort, conjuncts)
    }

    pub fn meet_all<'a>(sort: Sort, types: impl IntoIterator<Item = &'a NormalType>) -> Self {
        NormalType::from_atoms(
            sort,
            types.into_iter().flat_map(|t| t.conjuncts.iter().cloned()),
        )
    }

    pub fn depth(&self) -> usize {
        self.conjuncts.iter().map(Atom::depth).max().unwrap_or(0)
    }

    /// Number of conjuncts at the top level.
    pub fn width(&self) -> usize {
        self.conjuncts.len()
    }

    /// Largest conjunct count at any level of nesting.
    pub fn max_width(&self) -> usize {
        let inner = self
            .conjuncts
            .iter()
            .map(|a| match a {
                Atom::Field(_, d) => d.max_width(),
                Atom::Arrow(x, y) | Atom::Prod(x, y) | Atom::StoreArrow(x, y) => {
                    x.max_width().max(y.max_width())
                }
            })
            .max()
            .unwrap_or(0);
        inner.max(self.width())
    }

    /// Re-assembles the normal form as a right-nested intersection.
    pub fn to_expr(&self) -> TypeExpr {
        let mut it = self.conjuncts.iter().rev();
        match it.next() {
            None => TypeExpr::Omega(self.sort),
            Some(last) => it.fold(last.to_expr(), |acc, a| {
                TypeExpr::Inter(Box::new(a.to_expr()), Box::new(acc))
            }),
        }
    }

    pub fn measure(&self) -> (usize, usize) {
        self.to_expr().measure()
    }

    pub fn locations(&self, out: &mut BTreeSet<Location>) {
        for a in &self.conjuncts {
            a.locations(out);
        }
    }

    /// Key for the deterministic enumeration order: shallow and small first.
    pub fn enumeration_key(&self) -> (usize, usize, &NormalType) {
        let (d, s) = self.measure();
        (d, s, self)
    }
}

impl From<&TypeExpr> for NormalType {
    fn from(t: &TypeExpr) -> Self {
        normalize(t)
    }
}

/// Flattens intersections, drops top conjuncts, removes duplicates and sorts.
/// Components are normalised recursively. Purely syntactic: equivalences such
/// as `<l: wD> = wS` are left to the subtyping engine.
pub fn normalize(t: &TypeExpr) -> NormalType {
    fn collect(t: &TypeExpr, out: &mut Vec<Atom>) {
        match t {
            TypeExpr::Omega(_) => {}
            TypeExpr::Inter(a, b) => {
                collect(a, out);
                collect(b, out);
            }
            TypeExpr::Arrow(d, c) => out.push(Atom::Arrow(normalize(d), normalize(c))),
            TypeExpr::Field(l, d) => out.push(Atom::Field(*l, normalize(d))),
            TypeExpr::Prod(d, s) => out.push(Atom::Prod(normalize(d), normalize(s))),
            TypeExpr::StoreArrow(s, k) => out.push(Atom::StoreArrow(normalize(s), normalize(k))),
        }
    }
    let sort = t.sort().unwrap_or_else(|_| fallback_sort(t));
    let mut atoms = Vec::new();
    collect(t, &mut atoms);
    NormalType::from_atoms(sort, atoms)
}

// Ill-sorted trees can only be built by hand; keep normalize total anyway.
fn fallback_sort(t: &TypeExpr) -> Sort {
    match t {
        TypeExpr::Omega(s) => *s,
        TypeExpr::Arrow(..) => Sort::Value,
        TypeExpr::Field(..) => Sort::Store,
        TypeExpr::Prod(..) => Sort::Result,
        TypeExpr::StoreArrow(..) => Sort::Computation,
        TypeExpr::Inter(a, _) => fallback_sort(a),
    }
}

/// Locations bound to a non-trivial payload in a store type. Fields whose
/// payload is equivalent to `wD` are ignored, since `<l: wD> = wS`.
pub fn dom_of_store(store: &TypeExpr) -> Result<BTreeSet<Location>, TypeError> {
    let sort = store.sort()?;
    if sort != Sort::Store {
        return Err(TypeError::IllSorted { constructor: "store domain", expected: Sort::Store, found: sort });
    }
    Ok(store_domain(&normalize(store)))
}

pub fn store_domain(store: &NormalType) -> BTreeSet<Location> {
    store
        .conjuncts()
        .iter()
        .filter_map(|a| match a {
            Atom::Field(l, d) if !subtyping::is_top(d) => Some(*l),
            _ => None,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Enumeration

/// Above this many atoms the powerset is not expanded.
pub const MAX_EXPANDED_ATOMS: usize = 20;

/// Every atom of `sort` with depth at most `depth` over locations `locs`, in
/// the deterministic enumeration order.
pub fn enumerate_atoms(
    sort: Sort,
    depth: usize,
    locs: &BTreeSet<Location>,
) -> Result<Vec<Atom>, TypeError> {
    if depth == 0 {
        return Ok(Vec::new());
    }
    let below = |s: Sort| enumerate_types(s, depth - 1, locs);
    let mut atoms = Vec::new();
    match sort {
        Sort::Value => {
            let (ds, ts) = (below(Sort::Value)?, below(Sort::Computation)?);
            for d in &ds {
                for t in &ts {
                    atoms.push(Atom::Arrow(d.clone(), t.clone()));
                }
            }
        }
        Sort::Store => {
            for l in locs {
                for d in below(Sort::Value)? {
                    atoms.push(Atom::Field(*l, d));
                }
            }
        }
        Sort::Result => {
            let (ds, ss) = (below(Sort::Value)?, below(Sort::Store)?);
            for d in &ds {
                for s in &ss {
                    atoms.push(Atom::Prod(d.clone(), s.clone()));
                }
            }
        }
        Sort::Computation => {
            let (ss, ks) = (below(Sort::Store)?, below(Sort::Result)?);
            for s in &ss {
                for k in &ks {
                    atoms.push(Atom::StoreArrow(s.clone(), k.clone()));
                }
            }
        }
    }
    atoms.sort_by(|a, b| {
        let (na, nb) = (NormalType::atom(a.clone()), NormalType::atom(b.clone()));
        na.enumeration_key().cmp(&nb.enumeration_key())
    });
    Ok(atoms)
}

/// Every normal type of `sort` with depth at most `depth` over `locs`: all
/// intersections of the atoms from [`enumerate_atoms`]. Fails with
/// [`TypeError::TooLarge`] when the powerset would be astronomically large.
pub fn enumerate_types(
    sort: Sort,
    depth: usize,
    locs: &BTreeSet<Location>,
) -> Result<Vec<NormalType>, TypeError> {
    let atoms = enumerate_atoms(sort, depth, locs)?;
    if atoms.len() > MAX_EXPANDED_ATOMS {
        return Err(TypeError::TooLarge { sort, depth, atoms: atoms.len() });
    }
    let mut out = Vec::with_capacity(1 << atoms.len());
    for mask in 0u64..(1u64 << atoms.len()) {
        let picked = atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone());
        out.push(NormalType::from_atoms(sort, picked));
    }
    out.sort_by(|a, b| a.enumeration_key().cmp(&b.enumeration_key()));
    Ok(out)
}
