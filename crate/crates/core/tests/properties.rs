use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::sample::{select, subsequence};

use limp_core::corpus::{closed_computations, computations, values};
use limp_core::filters::{Bounds, DenHandle, PrincipalFilter};
use limp_core::grammar::parse_computation;
use limp_core::semantics::{interpret_comp, Env};
use limp_core::subtyping::leq_nf;
use limp_core::syntax::{substitute, Computation, Location, Term, Value};
use limp_core::types::{enumerate_atoms, NormalType, Sort};
use limp_core::typing::{
    check_derivation, derivation_from_str, derivation_to_string, enumerate_derivable_types, Context, Search,
};

fn l0() -> BTreeSet<Location> {
    BTreeSet::from([Location(0)])
}

fn bounds() -> Bounds {
    Bounds::new(3, 2, l0())
}

fn ty(sort: Sort, depth: usize) -> impl Strategy<Value = NormalType> {
    let atoms = enumerate_atoms(sort, depth, &l0()).unwrap();
    let n = atoms.len().min(3);
    subsequence(atoms, 0..=n).prop_map(move |a| NormalType::from_atoms(sort, a))
}

fn any_sort() -> impl Strategy<Value = Sort> {
    select(Sort::ALL.to_vec())
}

fn closed() -> &'static [Computation] {
    static C: OnceLock<Vec<Computation>> = OnceLock::new();
    C.get_or_init(|| closed_computations(5, &[Location(0)]))
}

/// Computations of size <= 4 over the free variables `a` and `b`.
fn open() -> &'static [Computation] {
    static C: OnceLock<Vec<Computation>> = OnceLock::new();
    let scope = ["a".to_string(), "b".to_string()];
    C.get_or_init(|| (1..=4).flat_map(|n| computations(n, &scope, &[Location(0)])).collect())
}

fn open_value() -> impl Strategy<Value = Value> {
    let scope = ["c".to_string()];
    select((0..=3).flat_map(|n| values(n, &scope, &[Location(0)])).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_is_idempotent(t in any_sort().prop_flat_map(|s| ty(s, 3))) {
        let once = t.to_expr().normalize();
        prop_assert_eq!(&once, &t);
        prop_assert_eq!(once.to_expr().normalize(), once);
    }

    #[test]
    fn preorder_meet_top((a, b, c) in any_sort().prop_flat_map(|s| (ty(s, 3), ty(s, 3), ty(s, 3)))) {
        prop_assert!(leq_nf(&a, &a));
        if leq_nf(&a, &b) && leq_nf(&b, &c) {
            prop_assert!(leq_nf(&a, &c));
        }
        let ab = a.meet(&b);
        prop_assert!(leq_nf(&ab, &a) && leq_nf(&ab, &b));
        prop_assert_eq!(leq_nf(&c, &ab), leq_nf(&c, &a) && leq_nf(&c, &b));
        prop_assert!(leq_nf(&a, &NormalType::omega(a.sort())));
    }

    #[test]
    fn substitution_free_variables(m in select(open()), v in open_value(), x in select(vec!["a", "b", "z"])) {
        let out = substitute(&m, x, &v).free_vars();
        let mut want = m.free_vars();
        if want.remove(x) {
            want.extend(v.free_vars());
        }
        prop_assert_eq!(out, want);
    }

    #[test]
    fn alpha_equivalence_laws(m in select(open()), n in select(open())) {
        prop_assert!(m.alpha_eq(&m));
        prop_assert_eq!(m.alpha_eq(&n), n.alpha_eq(&m));
        let renamed = parse_computation(&m.to_string().replace("x0", "q").replace("x1", "r")).unwrap();
        prop_assert!(renamed.alpha_eq(&m));
    }

    #[test]
    fn principal_filters_are_filters((g, a, b) in any_sort().prop_flat_map(|s| (ty(s, 2), ty(s, 3), ty(s, 3)))) {
        let f = PrincipalFilter::new(g);
        if f.contains(&a) && f.contains(&b) {
            prop_assert!(f.contains(&a.meet(&b)));
        }
        if f.contains(&a) && leq_nf(&a, &b) {
            prop_assert!(f.contains(&b));
        }
    }

    #[test]
    fn denotations_are_filters(m in select(closed()), a in ty(Sort::Computation, 3), c in ty(Sort::Computation, 3)) {
        let b = bounds();
        let d = interpret_comp(&m, &Env::new());
        let (ma, mc) = (d.member(&a, &b), d.member(&c, &b));
        if ma && mc {
            prop_assert!(d.member(&a.meet(&c), &b));
        }
        if ma && leq_nf(&a, &c) {
            prop_assert!(mc);
        }
    }

    #[test]
    fn denotation_is_monotone_in_the_environment(
        m in select(open()),
        (d1, d2) in (ty(Sort::Value, 2), ty(Sort::Value, 2)),
        k in ty(Sort::Computation, 3),
    ) {
        let b = bounds();
        let small = Env::new().extend("a", PrincipalFilter::new(d1.clone())).extend("b", PrincipalFilter::new(d2.clone()));
        let big = Env::new().extend("a", PrincipalFilter::new(d1.meet(&d2))).extend("b", PrincipalFilter::new(d2));
        if interpret_comp(&m, &small).member(&k, &b) {
            prop_assert!(interpret_comp(&m, &big).member(&k, &b));
        }
    }

    #[test]
    fn subsumption_and_context_strengthening(
        m in select(open()),
        (d1, d2) in (ty(Sort::Value, 2), ty(Sort::Value, 2)),
        (phi, psi) in (ty(Sort::Computation, 2), ty(Sort::Computation, 2)),
    ) {
        let b = bounds();
        let t = Term::Comp(m.clone());
        let weak: Context = [("a".to_string(), d1.clone()), ("b".to_string(), d2.clone())].into();
        let strong: Context = [("a".to_string(), d1.meet(&d2)), ("b".to_string(), d2)].into();
        let mut s = Search::new(&b);
        if s.provable(&weak, &t, &phi) {
            prop_assert!(s.provable(&strong, &t, &phi));
            if leq_nf(&phi, &psi) {
                prop_assert!(s.provable(&weak, &t, &psi));
            }
        }
    }

    #[test]
    fn derivations_check_and_round_trip(m in select(closed())) {
        let b = bounds();
        let t = Term::Comp(m.clone());
        let ctx = Context::new();
        let derivable = enumerate_derivable_types(&ctx, &t, 2, &b).unwrap();
        let mut s = Search::new(&b);
        for a in derivable.nontrivial_atoms() {
            let target = NormalType::atom(a.clone());
            let d = s.derive(&ctx, &t, &target).expect("provable atom has a derivation");
            prop_assert_eq!(&d.conclusion.ty, &target);
            prop_assert!(check_derivation(&d).is_ok(), "{:?}", check_derivation(&d));
            let back = derivation_from_str(&derivation_to_string(&d)).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
