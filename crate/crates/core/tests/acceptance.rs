//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Run with `cargo test -p limp-core --test acceptance`. The process exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use limp_core::corpus::{closed_computations, closed_values, handcrafted_instances, law_instances, sample, LawSuite};
use limp_core::filters::{apply_principal, Bounds, DenHandle, PrincipalFilter};
use limp_core::grammar::{parse_computation, parse_type};
use limp_core::semantics::{
    check_law_instance, eval_with_store, interpret_comp, interpret_value, store_satisfies, type_members,
    Denotation, Env, EvalResult, Store,
};
use limp_core::subtyping::{equiv, invert_arrow, leq, leq_nf, project, ClosureOracle};
use limp_core::syntax::{lam, Computation, Location, Term};
use limp_core::types::{enumerate_atoms, enumerate_types, Atom, NormalType, Sort, TypeExpr};
use limp_core::typing::{derive_search, enumerate_derivable_types, Context, Judgment, TypeSet};

const SUBTYPING_PAIR_CAP: usize = 200_000;
const SUBTYPING_TIME_LIMIT: Duration = Duration::from_secs(5 * 60);
const RANDOM_TRIPLES_PER_SORT: usize = 10_000;
const MONAD_FUNCTIONS_MIN: usize = 10;
const LAW_CORPUS_SIZE: usize = 4;
const LAW_EXTRA_SIZE: usize = 6;
const HANDCRAFTED_MIN: usize = 20;
const LAW_DEPTH: usize = 3;
const LAW_TIME_LIMIT: Duration = Duration::from_secs(10 * 60);
const SEMANTICS_CORPUS_SIZE: usize = 4;
const SEMANTICS_SAMPLE: usize = 50;
const SMOKE_TRIPLES_MIN: usize = 20;
const EVAL_FUEL: usize = 10_000;
const SEED: u64 = 0x5eed;

fn l0() -> BTreeSet<Location> {
    BTreeSet::from([Location(0)])
}

fn bounds() -> Bounds {
    Bounds::new(3, 2, l0())
}

fn universe(sort: Sort) -> Vec<NormalType> {
    enumerate_types(sort, 2, &l0()).unwrap()
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn verdict(failures: &[String], checked: usize, what: &str) -> Outcome {
    let mut detail = format!("{checked} {what}, {} discrepancies", failures.len());
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome { ok: failures.is_empty(), detail }
}

// 1 ---------------------------------------------------------------------------

fn subtyping_vs_oracle() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for sort in Sort::ALL {
        let u = universe(sort);
        let oracle = ClosureOracle::new(&u);
        let mut pairs: Vec<(usize, usize)> =
            (0..u.len()).flat_map(|i| (0..u.len()).map(move |j| (i, j))).collect();
        if pairs.len() > SUBTYPING_PAIR_CAP {
            pairs = sample(&pairs, SUBTYPING_PAIR_CAP, SEED);
        }
        for (i, j) in pairs {
            checked += 1;
            if leq_nf(&u[i], &u[j]) != oracle.leq(&u[i], &u[j]).unwrap() {
                failures.push(format!("{} <= {}", u[i], u[j]));
            }
        }
    }
    let elapsed = start.elapsed();
    let mut out = verdict(&failures, checked, "pairs");
    out.detail.push_str(&format!(" in {:.1}s", elapsed.as_secs_f64()));
    out.ok &= elapsed <= SUBTYPING_TIME_LIMIT;
    out
}

// 2 ---------------------------------------------------------------------------

fn omega_equivalences() -> Outcome {
    let w = TypeExpr::omega;
    let mut failures = Vec::new();
    let mut checked = 0;
    for d in universe(Sort::Value) {
        let lhs = TypeExpr::arrow(d.to_expr(), w(Sort::Computation)).unwrap();
        checked += 1;
        if !equiv(&lhs, &w(Sort::Value)).unwrap() {
            failures.push(format!("{lhs} = wD"));
        }
    }
    let field = TypeExpr::field(Location(0), w(Sort::Value)).unwrap();
    let sarrow = TypeExpr::store_arrow(w(Sort::Store), w(Sort::Result)).unwrap();
    let pair = TypeExpr::prod(w(Sort::Value), w(Sort::Store)).unwrap();
    for (ok, what) in [
        (equiv(&field, &w(Sort::Store)).unwrap(), "<l0: wD> = wS"),
        (equiv(&sarrow, &w(Sort::Computation)).unwrap(), "wS -> wC = wT"),
        (!leq(&w(Sort::Result), &pair).unwrap(), "wC </= wD * wS"),
    ] {
        checked += 1;
        if !ok {
            failures.push(what.to_string());
        }
    }
    verdict(&failures, checked, "equations")
}

// 3 ---------------------------------------------------------------------------

fn lattice_laws(a: &NormalType, b: &NormalType, c: &NormalType, failures: &mut Vec<String>) {
    let ab = a.meet(b);
    let checks = [
        (leq_nf(a, a), "reflexivity"),
        (!(leq_nf(a, b) && leq_nf(b, c)) || leq_nf(a, c), "transitivity"),
        (leq_nf(&ab, a) && leq_nf(&ab, b), "meet is a lower bound"),
        (!(leq_nf(c, a) && leq_nf(c, b)) || leq_nf(c, &ab), "meet is greatest"),
        (leq_nf(a, &NormalType::omega(a.sort())), "top"),
        (leq_nf(&ab, &b.meet(a)) && leq_nf(&a.meet(&b.meet(c)), &ab.meet(c)), "meet is commutative and associative"),
    ];
    for (ok, law) in checks {
        if !ok {
            failures.push(format!("{law}: {a}, {b}, {c}"));
        }
    }
}

fn random_type(rng: &mut ChaCha8Rng, atoms: &[Atom], sort: Sort) -> NormalType {
    let n = rng.gen_range(0..=3);
    NormalType::from_atoms(sort, (0..n).map(|_| atoms.choose(rng).unwrap().clone()))
}

fn preorder_meet_top() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for sort in Sort::ALL {
        let u = universe(sort);
        for a in &u {
            for b in &u {
                for c in &u {
                    checked += 1;
                    lattice_laws(a, b, c, &mut failures);
                }
            }
        }
        let atoms = enumerate_atoms(sort, 3, &l0()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ sort as u64);
        for _ in 0..RANDOM_TRIPLES_PER_SORT {
            let (a, b, c) = (
                random_type(&mut rng, &atoms, sort),
                random_type(&mut rng, &atoms, sort),
                random_type(&mut rng, &atoms, sort),
            );
            checked += 1;
            lattice_laws(&a, &b, &c, &mut failures);
        }
    }
    verdict(&failures, checked, "triples")
}

// 4 ---------------------------------------------------------------------------

fn beta_soundness() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (fs, args, res) in [
        (Sort::Value, Sort::Value, Sort::Computation),
        (Sort::Computation, Sort::Store, Sort::Result),
    ] {
        for phi in universe(fs) {
            for a in universe(args) {
                let inv = invert_arrow(&phi.to_expr(), &a.to_expr()).unwrap();
                for psi in universe(res) {
                    let arrow = match fs {
                        Sort::Value => TypeExpr::arrow(a.to_expr(), psi.to_expr()),
                        _ => TypeExpr::store_arrow(a.to_expr(), psi.to_expr()),
                    }
                    .unwrap();
                    checked += 1;
                    if leq(&phi.to_expr(), &arrow).unwrap() != leq(&inv, &psi.to_expr()).unwrap() {
                        failures.push(format!("{phi} against {arrow}"));
                    }
                }
            }
        }
    }
    verdict(&failures, checked, "triples")
}

// 5 ---------------------------------------------------------------------------

/// `f · X` for a function denotation and a principal argument.
fn apply(f: &Denotation, x: &PrincipalFilter) -> Denotation {
    match f {
        Denotation::Principal(p) => Denotation::Principal(apply_principal(p, x).unwrap()),
        Denotation::Abs(y, body, env) => interpret_comp(body, &env.extend(y, x.clone())),
        other => panic!("not a function: {other:?}"),
    }
}

/// The Kleisli composite `X ↦ (f · X) >>= g`, built from filters only.
struct Kleisli<'a> {
    f: &'a Denotation,
    g: &'a Denotation,
}

impl DenHandle for Kleisli<'_> {
    fn sort(&self) -> Sort {
        Sort::Value
    }

    fn member(&self, target: &NormalType, b: &Bounds) -> bool {
        target.sort() == Sort::Value
            && target.conjuncts().iter().all(|a| match a {
                _ if limp_core::subtyping::atom_is_top(a) => true,
                Atom::Arrow(d, t) => {
                    let fx = apply(self.f, &PrincipalFilter::new(d.clone()));
                    Denotation::Bind(Box::new(fx), Box::new(self.g.clone())).member(t, b)
                }
                _ => false,
            })
    }
}

fn members(d: &dyn DenHandle, sort: Sort, b: &Bounds) -> TypeSet {
    TypeSet::from_predicate(sort, LAW_DEPTH, &b.locs, |a| d.member(&NormalType::atom(a.clone()), b)).unwrap()
}

fn function_family() -> Vec<Denotation> {
    let e = Env::new();
    let mut fs: Vec<Denotation> = closed_values(4, &[Location(0)])
        .iter()
        .map(|v| interpret_value(v, &e))
        .collect();
    for src in ["wD -> wT", "(wD -> wT) -> wS -> (wD -> wT) * wS", "wD -> <l0: wD> -> wD * wS"] {
        fs.push(Denotation::Principal(PrincipalFilter::new(parse_type(src).unwrap().normalize())));
    }
    fs
}

fn principal_points(sort: Sort) -> Vec<NormalType> {
    let atoms: Vec<Atom> = enumerate_atoms(sort, 2, &l0()).unwrap();
    let mut out: Vec<NormalType> = universe(sort);
    let deep = enumerate_atoms(sort, 3, &l0()).unwrap();
    for (i, a) in deep.iter().enumerate().step_by(7) {
        out.push(NormalType::atom(a.clone()));
        out.push(NormalType::from_atoms(sort, [a.clone(), atoms[i % atoms.len()].clone()]));
    }
    out
}

fn filter_monad_laws() -> Outcome {
    let b = bounds();
    let fs = function_family();
    let unit_fn = interpret_value(&lam("x", limp_core::syntax::unit(limp_core::syntax::var("x"))), &Env::new());
    let mut failures = Vec::new();
    let mut checked = 0;
    for d in principal_points(Sort::Value) {
        let x = PrincipalFilter::new(d.clone());
        for f in &fs {
            checked += 1;
            let lhs = Denotation::Bind(Box::new(Denotation::Unit(Box::new(Denotation::Principal(x.clone())))), Box::new(f.clone()));
            if members(&lhs, Sort::Computation, &b) != members(&apply(f, &x), Sort::Computation, &b) {
                failures.push(format!("left unit at {d} with {f:?}"));
            }
        }
    }
    let kappas = principal_points(Sort::Computation);
    for k in &kappas {
        let t = Denotation::Principal(PrincipalFilter::new(k.clone()));
        checked += 1;
        let lhs = Denotation::Bind(Box::new(t.clone()), Box::new(unit_fn.clone()));
        if members(&lhs, Sort::Computation, &b) != members(&t, Sort::Computation, &b) {
            failures.push(format!("right unit at {k}"));
        }
    }
    for k in kappas.iter().step_by(3) {
        let t = Denotation::Principal(PrincipalFilter::new(k.clone()));
        for f in &fs {
            for g in fs.iter().step_by(2) {
                checked += 1;
                let lhs = Denotation::Bind(
                    Box::new(Denotation::Bind(Box::new(t.clone()), Box::new(f.clone()))),
                    Box::new(g.clone()),
                );
                let lhs = members(&lhs, Sort::Computation, &b);
                let comp = Kleisli { f, g };
                let rhs = limp_core::filters::member_bind_nf;
                let rhs = TypeSet::from_predicate(Sort::Computation, LAW_DEPTH, &b.locs, |a| {
                    rhs(&t, &comp, &NormalType::atom(a.clone()), &b)
                })
                .unwrap();
                if lhs != rhs {
                    failures.push(format!("associativity at {k}"));
                }
            }
        }
    }
    let mut out = verdict(&failures, checked, "law instances");
    out.detail.push_str(&format!(" over {} functions", fs.len()));
    out.ok &= fs.len() >= MONAD_FUNCTIONS_MIN;
    out
}

// 6 ---------------------------------------------------------------------------

fn true_equations() -> Outcome {
    let start = Instant::now();
    let b = bounds();
    let locs = [Location(0)];
    let mut failures = Vec::new();
    let mut per_law = [0usize; 5];
    let hand = handcrafted_instances();
    let mut instances = Vec::new();
    for law in 1..=5 {
        instances.extend(law_instances(law, LAW_EXTRA_SIZE.max(LAW_CORPUS_SIZE), &locs));
    }
    instances.extend(hand.iter().cloned());
    for inst in &instances {
        per_law[inst.law() as usize - 1] += 1;
        match check_law_instance(inst, LAW_DEPTH, &b) {
            Ok(true) => {}
            Ok(false) => failures.push(inst.to_string()),
            Err(e) => failures.push(format!("{inst}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let mut out = verdict(&failures, instances.len(), "instances");
    out.detail.push_str(&format!(
        " (per law {per_law:?}, {} handcrafted) in {:.1}s",
        hand.len(),
        elapsed.as_secs_f64()
    ));
    out.ok &= hand.len() >= HANDCRAFTED_MIN && elapsed <= LAW_TIME_LIMIT && per_law.iter().all(|&n| n > 0);
    out
}

// 7 ---------------------------------------------------------------------------

fn type_semantics() -> Outcome {
    let b = bounds();
    let ctx = Context::new();
    let mut failures = Vec::new();
    let corpus = closed_computations(SEMANTICS_CORPUS_SIZE, &[Location(0)]);
    let larger = closed_computations(SEMANTICS_CORPUS_SIZE + 1, &[Location(0)]);
    let deep = sample(&larger, SEMANTICS_SAMPLE, SEED);
    let mut checked = 0;
    for (terms, depth) in [(&corpus, 2), (&deep, 3)] {
        for m in terms.iter() {
            let t = Term::Comp(m.clone());
            let syn = enumerate_derivable_types(&ctx, &t, depth, &b).unwrap();
            let sem = type_members(&t, &ctx, depth, &b).unwrap();
            checked += 1;
            if syn != sem {
                let (only_syn, only_sem) = syn.diff(&sem);
                failures.push(format!("{m} at depth {depth}: derivable only {only_syn:?}, semantic only {only_sem:?}"));
            }
        }
    }
    let mut out = verdict(&failures, checked, "terms");
    out.detail.push_str(&format!(" ({} at depth 2, {} at depth 3)", corpus.len(), deep.len()));
    out
}

// 8 ---------------------------------------------------------------------------

fn operational_smoke() -> Outcome {
    let b = bounds();
    let ctx = Context::new();
    let stores: Vec<Store> = ["\\x. [x]", "\\x. [\\y. [x]]", "\\x. get(l0, \\y. [y])"]
        .iter()
        .map(|src| {
            let v = match parse_computation(&format!("[{src}]")).unwrap() {
                Computation::Unit(v) => v,
                _ => unreachable!(),
            };
            Store::new().with(Location(0), v)
        })
        .chain([Store::new()])
        .collect();
    let mut failures = Vec::new();
    let mut triples = 0;
    for m in closed_computations(SEMANTICS_CORPUS_SIZE, &[Location(0)]) {
        let types = enumerate_derivable_types(&ctx, &Term::Comp(m.clone()), 3, &b).unwrap();
        for a in types.nontrivial_atoms() {
            let Atom::StoreArrow(sigma, k) = a else { continue };
            let Some((delta, sigma2)) = project(k) else { continue };
            for s in &stores {
                if !store_satisfies(s, sigma, &b) {
                    continue;
                }
                triples += 1;
                match eval_with_store(&m, s, EVAL_FUEL) {
                    Ok(EvalResult::Done { value, store }) => {
                        let j = Judgment::new(Context::new(), Term::Value(value.clone()), delta.clone());
                        if derive_search(&j, &b).is_none() || !store_satisfies(&store, &sigma2, &b) {
                            failures.push(format!("{m} in {s}: {value}, {store} against {a}"));
                        }
                    }
                    other => failures.push(format!("{m} in {s}: {other:?} against {a}")),
                }
            }
        }
    }
    let mut out = verdict(&failures, triples, "triples");
    out.ok &= triples >= SMOKE_TRIPLES_MIN;
    out
}

// 9 ---------------------------------------------------------------------------

fn determinism_round_trip() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    let corpus = closed_computations(SEMANTICS_CORPUS_SIZE + 1, &[Location(0)]);
    for m in &corpus {
        checked += 1;
        match parse_computation(&m.to_string()) {
            Ok(back) if back.alpha_eq(m) => {}
            other => failures.push(format!("{m}: {other:?}")),
        }
    }
    for inst in handcrafted_instances() {
        let (lhs, rhs) = inst.sides().unwrap();
        for m in [lhs, rhs] {
            checked += 1;
            if !parse_computation(&m.to_string()).is_ok_and(|back| back.alpha_eq(&m)) {
                failures.push(m.to_string());
            }
        }
    }
    for sort in Sort::ALL {
        for t in universe(sort) {
            checked += 1;
            if !parse_type(&t.to_string()).is_ok_and(|e| e.normalize() == t) {
                failures.push(t.to_string());
            }
        }
    }
    let run = || {
        let mut suite = LawSuite::new(4, 2, SEED);
        suite.samples = 5;
        suite.run().render()
    };
    checked += 1;
    if run() != run() {
        failures.push("law-suite report differs between runs".into());
    }
    checked += 1;
    if sample(&corpus, 20, SEED) != sample(&corpus, 20, SEED) {
        failures.push("corpus sample differs between runs".into());
    }
    verdict(&failures, checked, "checks")
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("subtyping agrees with the closure oracle", subtyping_vs_oracle),
        ("omega equivalences", omega_equivalences),
        ("preorder, meet and top laws", preorder_meet_top),
        ("beta-soundness of arrow inversion", beta_soundness),
        ("filter-level monad laws", filter_monad_laws),
        ("five equations on the instance corpus", true_equations),
        ("derivable types equal semantic members", type_semantics),
        ("operational smoke test", operational_smoke),
        ("round trips and determinism", determinism_round_trip),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if filter.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        all &= out.ok;
        let status = if out.ok { "PASS" } else { "FAIL" };
        println!("{status}\t{}. {name}: {} [{:.1}s]", i + 1, out.detail, start.elapsed().as_secs_f64());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
