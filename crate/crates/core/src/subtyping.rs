//! Subtyping for the four type theories.
//!
//! [`leq`] is a syntax-directed procedure on normal forms. [`ClosureOracle`]
//! saturates the axioms and rules over a finite universe and is the reference
//! the procedure is tested against.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::syntax::Location;
use crate::types::{Atom, NormalType, Sort, TypeError, TypeExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("type `{0}` is not in the oracle universe")]
    NotInUniverse(String),
}

/// Recognises types equivalent to the top type of their sort: `d -> t` with
/// `t` top, `<l: d>` with `d` top, `s -> k` with `k` top. A product is never
/// top.
pub fn is_top(t: &NormalType) -> bool {
    t.conjuncts().iter().all(atom_is_top)
}

pub fn atom_is_top(a: &Atom) -> bool {
    match a {
        Atom::Arrow(_, t) => is_top(t),
        Atom::Field(_, d) => is_top(d),
        Atom::Prod(..) => false,
        Atom::StoreArrow(_, k) => is_top(k),
    }
}

thread_local! {
    static MEMO: RefCell<HashMap<(NormalType, NormalType), bool>> = RefCell::new(HashMap::new());
}

/// Entries kept before the memo table is flushed.
const MEMO_LIMIT: usize = 1 << 20;

/// `a <= b` on normal forms of the same sort.
pub fn leq_nf(a: &NormalType, b: &NormalType) -> bool {
    debug_assert_eq!(a.sort(), b.sort());
    if b.is_omega() || a == b {
        return true;
    }
    let key = (a.clone(), b.clone());
    if let Some(r) = MEMO.with(|m| m.borrow().get(&key).copied()) {
        return r;
    }
    let r = b
        .conjuncts()
        .iter()
        .all(|beta| atom_is_top(beta) || leq_atom(a, beta));
    MEMO.with(|m| {
        let mut m = m.borrow_mut();
        if m.len() >= MEMO_LIMIT {
            m.clear();
        }
        m.insert(key, r);
    });
    r
}

fn leq_atom(a: &NormalType, beta: &Atom) -> bool {
    match beta {
        Atom::Arrow(d, t) | Atom::StoreArrow(d, t) => leq_nf(&invert_nf(a, d), t),
        Atom::Field(l, d) => leq_nf(&lookup(a, *l), d),
        Atom::Prod(d, s) => match project(a) {
            Some((pd, ps)) => leq_nf(&pd, d) && leq_nf(&ps, s),
            None => false,
        },
    }
}

pub fn equiv_nf(a: &NormalType, b: &NormalType) -> bool {
    leq_nf(a, b) && leq_nf(b, a)
}

/// Least `t` with `f <= arg -> t`: the meet of the codomains of those arrow
/// conjuncts of `f` whose domain is above `arg`. Works for value and
/// computation types alike.
pub fn invert_nf(f: &NormalType, arg: &NormalType) -> NormalType {
    let cod_sort = match f.sort() {
        Sort::Value => Sort::Computation,
        Sort::Computation => Sort::Result,
        s => panic!("invert_nf on a {s} type"),
    };
    let cods = f.conjuncts().iter().filter_map(|a| match a {
        Atom::Arrow(d, t) | Atom::StoreArrow(d, t) if leq_nf(arg, d) => Some(t),
        _ => None,
    });
    NormalType::meet_all(cod_sort, cods)
}

/// Meet of the payloads at `l` in a store type (`wD` when there are none).
pub fn lookup(store: &NormalType, l: Location) -> NormalType {
    let payloads = store.conjuncts().iter().filter_map(|a| match a {
        Atom::Field(m, d) if *m == l => Some(d),
        _ => None,
    });
    NormalType::meet_all(Sort::Value, payloads)
}

/// Componentwise meets of the product conjuncts of a result type, or `None`
/// when there are no products (the type is then `wC`, the divergent result).
pub fn project(k: &NormalType) -> Option<(NormalType, NormalType)> {
    let mut vals = Vec::new();
    let mut stores = Vec::new();
    for a in k.conjuncts() {
        if let Atom::Prod(d, s) = a {
            vals.push(d);
            stores.push(s);
        }
    }
    if vals.is_empty() {
        None
    } else {
        Some((
            NormalType::meet_all(Sort::Value, vals),
            NormalType::meet_all(Sort::Store, stores),
        ))
    }
}

fn same_sort(a: &TypeExpr, b: &TypeExpr) -> Result<(), TypeError> {
    let (sa, sb) = (a.sort()?, b.sort()?);
    if sa == sb {
        Ok(())
    } else {
        Err(TypeError::SortMismatch { left: sa, right: sb })
    }
}

pub fn leq(phi: &TypeExpr, psi: &TypeExpr) -> Result<bool, TypeError> {
    same_sort(phi, psi)?;
    Ok(leq_nf(&phi.normalize(), &psi.normalize()))
}

pub fn equiv(phi: &TypeExpr, psi: &TypeExpr) -> Result<bool, TypeError> {
    same_sort(phi, psi)?;
    Ok(equiv_nf(&phi.normalize(), &psi.normalize()))
}

/// The least result type of applying `phi` to `arg`.
pub fn invert_arrow(phi: &TypeExpr, arg: &TypeExpr) -> Result<TypeExpr, TypeError> {
    let (sf, sa) = (phi.sort()?, arg.sort()?);
    let want = match sf {
        Sort::Value => Sort::Value,
        Sort::Computation => Sort::Store,
        other => {
            return Err(TypeError::IllSorted {
                constructor: "arrow inversion",
                expected: Sort::Value,
                found: other,
            })
        }
    };
    if sa != want {
        return Err(TypeError::IllSorted { constructor: "arrow inversion argument", expected: want, found: sa });
    }
    Ok(invert_nf(&phi.normalize(), &arg.normalize()).to_expr())
}

// ---------------------------------------------------------------------------
// Closure oracle

/// Saturation of the subtyping axioms and rules over a finite universe.
///
/// The universe is first closed under components and single conjuncts, and
/// the top types plus the right-hand sides of the top axioms are added. The
/// relation is then the least one containing reflexivity, top, the axiom
/// instances, and conjunct inclusion, closed under the structural rules,
/// intersection introduction and transitivity, all restricted to the universe.
pub struct ClosureOracle {
    index: HashMap<NormalType, usize>,
    elems: Vec<NormalType>,
    rel: Vec<Vec<u64>>,
}

impl ClosureOracle {
    pub fn new(universe: &[NormalType]) -> Self {
        let mut elems: Vec<NormalType> = Vec::new();
        let mut index: HashMap<NormalType, usize> = HashMap::new();
        let mut stack: Vec<NormalType> = universe.to_vec();
        let mut locs = BTreeSet::new();
        for t in universe {
            t.locations(&mut locs);
        }
        let w = NormalType::omega;
        for s in Sort::ALL {
            stack.push(w(s));
        }
        stack.push(NormalType::arrow(w(Sort::Value), w(Sort::Computation)));
        stack.push(NormalType::store_arrow(w(Sort::Store), w(Sort::Result)));
        for l in &locs {
            stack.push(NormalType::field(*l, w(Sort::Value)));
        }
        while let Some(t) = stack.pop() {
            if index.contains_key(&t) {
                continue;
            }
            for a in t.conjuncts() {
                if t.width() > 1 {
                    stack.push(NormalType::atom(a.clone()));
                }
                match a {
                    Atom::Field(_, d) => stack.push(d.clone()),
                    Atom::Arrow(x, y) | Atom::Prod(x, y) | Atom::StoreArrow(x, y) => {
                        stack.push(x.clone());
                        stack.push(y.clone());
                    }
                }
            }
            index.insert(t.clone(), elems.len());
            elems.push(t);
        }

        let n = elems.len();
        let words = n.div_ceil(64);
        let mut oracle = ClosureOracle { index, elems, rel: vec![vec![0u64; words]; n] };
        oracle.seed();
        oracle.saturate();
        oracle
    }

    fn set(&mut self, i: usize, j: usize) -> bool {
        let (w, bit) = (j / 64, 1u64 << (j % 64));
        let fresh = self.rel[i][w] & bit == 0;
        self.rel[i][w] |= bit;
        fresh
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.rel[i][j / 64] & (1u64 << (j % 64)) != 0
    }

    fn idx(&self, t: &NormalType) -> Option<usize> {
        self.index.get(t).copied()
    }

    fn seed(&mut self) {
        let n = self.elems.len();
        let mut facts = Vec::new();
        for i in 0..n {
            let a = &self.elems[i];
            facts.push((i, i));
            if let Some(top) = self.idx(&NormalType::omega(a.sort())) {
                facts.push((i, top));
            }
            // conjunct inclusion: a & b <= a, a & b <= b
            for j in 0..n {
                let b = &self.elems[j];
                if b.sort() == a.sort() && b.conjuncts().iter().all(|x| a.conjuncts().contains(x)) {
                    facts.push((i, j));
                }
            }
            // distributivity axioms, for every pair of conjuncts of `a`
            let cs = a.conjuncts();
            for p in 0..cs.len() {
                for q in p + 1..cs.len() {
                    let target = match (&cs[p], &cs[q]) {
                        (Atom::Arrow(d1, t1), Atom::Arrow(d2, t2)) if d1 == d2 => {
                            Some(NormalType::arrow(d1.clone(), t1.meet(t2)))
                        }
                        (Atom::StoreArrow(s1, k1), Atom::StoreArrow(s2, k2)) if s1 == s2 => {
                            Some(NormalType::store_arrow(s1.clone(), k1.meet(k2)))
                        }
                        (Atom::Field(l1, d1), Atom::Field(l2, d2)) if l1 == l2 => {
                            Some(NormalType::field(*l1, d1.meet(d2)))
                        }
                        (Atom::Prod(d1, s1), Atom::Prod(d2, s2)) => {
                            Some(NormalType::prod(d1.meet(d2), s1.meet(s2)))
                        }
                        _ => None,
                    };
                    if let Some(j) = target.and_then(|t| self.idx(&t)) {
                        facts.push((i, j));
                    }
                }
            }
        }
        // top axioms
        let w = NormalType::omega;
        let mut tops = vec![
            (w(Sort::Value), NormalType::arrow(w(Sort::Value), w(Sort::Computation))),
            (w(Sort::Computation), NormalType::store_arrow(w(Sort::Store), w(Sort::Result))),
        ];
        let mut locs = BTreeSet::new();
        for t in &self.elems {
            t.locations(&mut locs);
        }
        for l in locs {
            tops.push((w(Sort::Store), NormalType::field(l, w(Sort::Value))));
        }
        for (a, b) in tops {
            if let (Some(i), Some(j)) = (self.idx(&a), self.idx(&b)) {
                facts.push((i, j));
            }
        }
        for (i, j) in facts {
            self.set(i, j);
        }
    }

    fn saturate(&mut self) {
        let n = self.elems.len();
        // component indices of every single-conjunct element
        let mut atoms: Vec<(usize, u8, Option<Location>, usize, usize)> = Vec::new();
        for i in 0..n {
            if let [a] = self.elems[i].conjuncts() {
                let entry = match a {
                    Atom::Arrow(d, t) => (0, None, self.idx(d).unwrap(), self.idx(t).unwrap()),
                    Atom::Field(l, d) => {
                        let di = self.idx(d).unwrap();
                        (1, Some(*l), di, di)
                    }
                    Atom::Prod(d, s) => (2, None, self.idx(d).unwrap(), self.idx(s).unwrap()),
                    Atom::StoreArrow(s, k) => (3, None, self.idx(s).unwrap(), self.idx(k).unwrap()),
                };
                atoms.push((i, entry.0, entry.1, entry.2, entry.3));
            }
        }
        // conjunct indices of every multi-conjunct element
        let meets: Vec<(usize, Vec<usize>)> = (0..n)
            .filter(|&i| self.elems[i].width() > 1)
            .map(|i| {
                let parts = self.elems[i]
                    .conjuncts()
                    .iter()
                    .map(|a| self.idx(&NormalType::atom(a.clone())).unwrap())
                    .collect();
                (i, parts)
            })
            .collect();

        loop {
            let mut changed = false;

            // structural rules
            for &(i, ki, li, xi, yi) in &atoms {
                for &(j, kj, lj, xj, yj) in &atoms {
                    if ki != kj || li != lj || self.get(i, j) {
                        continue;
                    }
                    let ok = match ki {
                        0 | 3 => self.get(xj, xi) && self.get(yi, yj),
                        1 => self.get(xi, xj),
                        _ => self.get(xi, xj) && self.get(yi, yj),
                    };
                    if ok {
                        changed |= self.set(i, j);
                    }
                }
            }

            // intersection introduction
            for c in 0..n {
                for (m, parts) in &meets {
                    if self.elems[c].sort() == self.elems[*m].sort()
                        && !self.get(c, *m)
                        && parts.iter().all(|&p| self.get(c, p))
                    {
                        changed |= self.set(c, *m);
                    }
                }
            }

            // transitivity
            for k in 0..n {
                let row_k = self.rel[k].clone();
                for i in 0..n {
                    if i != k && self.get(i, k) {
                        for (w, bits) in row_k.iter().enumerate() {
                            let old = self.rel[i][w];
                            let new = old | bits;
                            if new != old {
                                self.rel[i][w] = new;
                                changed = true;
                            }
                        }
                    }
                }
            }

            if !changed {
                break;
            }
        }
    }

    /// Number of types in the closed universe.
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn contains(&self, t: &NormalType) -> bool {
        self.index.contains_key(t)
    }

    pub fn leq(&self, a: &NormalType, b: &NormalType) -> Result<bool, OracleError> {
        let i = self.idx(a).ok_or_else(|| OracleError::NotInUniverse(a.to_expr().to_string()))?;
        let j = self.idx(b).ok_or_else(|| OracleError::NotInUniverse(b.to_expr().to_string()))?;
        if a.sort() != b.sort() {
            return Err(TypeError::SortMismatch { left: a.sort(), right: b.sort() }.into());
        }
        Ok(self.get(i, j))
    }
}

/// One-shot oracle query. Building the oracle dominates; reuse a
/// [`ClosureOracle`] for many queries over the same universe.
pub fn closure_oracle_leq(
    phi: &TypeExpr,
    psi: &TypeExpr,
    universe: &[NormalType],
) -> Result<bool, OracleError> {
    same_sort(phi, psi)?;
    ClosureOracle::new(universe).leq(&phi.normalize(), &psi.normalize())
}

// ---------------------------------------------------------------------------
// Equivalence classes

thread_local! {
    static CLASSES: RefCell<HashMap<(Sort, usize, usize, BTreeSet<Location>), Vec<NormalType>>> =
        RefCell::new(HashMap::new());
}

/// One representative per equivalence class of types of `sort` whose depth is
/// at most `depth`, whose intersections have at most `width` conjuncts at every
/// level, and whose locations come from `locs`. The representative is the
/// first class member in enumeration order; `wS`-style tops come first.
pub fn class_representatives(
    sort: Sort,
    depth: usize,
    width: usize,
    locs: &BTreeSet<Location>,
) -> Vec<NormalType> {
    let key = (sort, depth, width, locs.clone());
    if let Some(v) = CLASSES.with(|c| c.borrow().get(&key).cloned()) {
        return v;
    }
    let reps = build_classes(sort, depth, width, locs);
    CLASSES.with(|c| c.borrow_mut().insert(key, reps.clone()));
    reps
}

fn build_classes(sort: Sort, depth: usize, width: usize, locs: &BTreeSet<Location>) -> Vec<NormalType> {
    let omega = NormalType::omega(sort);
    if depth == 0 || width == 0 {
        return vec![omega];
    }
    let below = |s: Sort| class_representatives(s, depth - 1, width, locs);
    let mut candidates = Vec::new();
    match sort {
        Sort::Value => {
            for d in below(Sort::Value) {
                for t in below(Sort::Computation) {
                    candidates.push(Atom::Arrow(d.clone(), t));
                }
            }
        }
        Sort::Store => {
            for l in locs {
                for d in below(Sort::Value) {
                    candidates.push(Atom::Field(*l, d));
                }
            }
        }
        Sort::Result => {
            for d in below(Sort::Value) {
                for s in below(Sort::Store) {
                    candidates.push(Atom::Prod(d.clone(), s));
                }
            }
        }
        Sort::Computation => {
            for s in below(Sort::Store) {
                for k in below(Sort::Result) {
                    candidates.push(Atom::StoreArrow(s.clone(), k));
                }
            }
        }
    }
    candidates.retain(|a| !atom_is_top(a));
    let atoms = dedup_classes(candidates.into_iter().map(NormalType::atom).collect());

    let mut all = vec![omega];
    let mut frontier: Vec<(usize, NormalType)> = vec![(0, NormalType::omega(sort))];
    for _ in 0..width {
        let mut next = Vec::new();
        for (start, t) in &frontier {
            for (k, a) in atoms.iter().enumerate().skip(*start) {
                next.push((k + 1, t.meet(a)));
            }
        }
        all.extend(next.iter().map(|(_, t)| t.clone()));
        frontier = next;
    }
    dedup_classes(all)
}

/// Keeps the first member of every equivalence class, after sorting by
/// enumeration order.
pub fn dedup_classes(mut types: Vec<NormalType>) -> Vec<NormalType> {
    types.sort_by(|a, b| a.enumeration_key().cmp(&b.enumeration_key()));
    types.dedup();
    let mut reps: Vec<NormalType> = Vec::new();
    for t in types {
        if !reps.iter().any(|r| equiv_nf(r, &t)) {
            reps.push(t);
        }
    }
    reps
}
