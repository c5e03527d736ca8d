//! Term corpora for the exhaustive and sampled checks.
//!
//! Terms are enumerated up to α-equivalence: a binder at nesting depth `n`
//! is always named `x{n}`, so each α-class appears exactly once. Size counts
//! λ, `[ ]`, `>>=`, `get` and `set` nodes; variables are free.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::filters::Bounds;
use crate::semantics::{check_law_instance, LawInstance};
use crate::syntax::{bind, get, lam, set, unit, Computation, Location, Value};

fn binder(depth: usize) -> String {
    format!("x{depth}")
}

/// Values of exactly `size` whose free variables lie in `scope`.
pub fn values(size: usize, scope: &[String], locs: &[Location]) -> Vec<Value> {
    if size == 0 {
        return scope.iter().map(|x| Value::Var(x.clone())).collect();
    }
    let x = binder(scope.len());
    let mut inner = scope.to_vec();
    inner.push(x.clone());
    computations(size - 1, &inner, locs).into_iter().map(|m| lam(&x, m)).collect()
}

/// Computations of exactly `size` whose free variables lie in `scope`.
pub fn computations(size: usize, scope: &[String], locs: &[Location]) -> Vec<Computation> {
    if size == 0 {
        return Vec::new();
    }
    let n = size - 1;
    let mut out: Vec<Computation> = values(n, scope, locs).into_iter().map(unit).collect();
    for i in 1..=n {
        for m in computations(i, scope, locs) {
            for v in values(n - i, scope, locs) {
                out.push(bind(m.clone(), v));
            }
        }
    }
    let x = binder(scope.len());
    let mut inner = scope.to_vec();
    inner.push(x.clone());
    for &l in locs {
        for m in computations(n, &inner, locs) {
            out.push(get(l, &x, m));
        }
        for i in 0..n {
            for v in values(i, scope, locs) {
                for m in computations(n - i, scope, locs) {
                    out.push(set(l, v.clone(), m));
                }
            }
        }
    }
    out
}

/// Closed computations of size at most `max_size`, smallest first.
pub fn closed_computations(max_size: usize, locs: &[Location]) -> Vec<Computation> {
    (1..=max_size).flat_map(|s| computations(s, &[], locs)).collect()
}

pub fn closed_values(max_size: usize, locs: &[Location]) -> Vec<Value> {
    (1..=max_size).flat_map(|s| values(s, &[], locs)).collect()
}

/// Compositions of `total` into `parts` sizes, each at least the given minimum.
fn splits(total: usize, mins: &[usize]) -> Vec<Vec<usize>> {
    fn go(left: usize, mins: &[usize], acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match mins.split_first() {
            None => out.push(acc.clone()),
            Some((&m, rest)) => {
                let reserve: usize = rest.iter().sum();
                if left < m + reserve {
                    return;
                }
                let hi = if rest.is_empty() { left } else { left - reserve };
                for s in m..=hi {
                    if rest.is_empty() && s != left {
                        continue;
                    }
                    acc.push(s);
                    go(left - s, rest, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(total, mins, &mut Vec::new(), &mut out);
    out
}

/// Every closed instance of `law` whose metavariables have total size at
/// most `max_total`.
pub fn law_instances(law: u8, max_total: usize, locs: &[Location]) -> Vec<LawInstance> {
    let x = binder(0);
    let scope = [x.clone()];
    let mut out = Vec::new();
    for total in 0..=max_total {
        match law {
            1 => {
                for sz in splits(total, &[1, 1]) {
                    for v in values(sz[0], &[], locs) {
                        for m in computations(sz[1], &scope, locs) {
                            out.push(LawInstance::LeftUnit { v: v.clone(), x: x.clone(), m });
                        }
                    }
                }
            }
            2 => {
                for m in computations(total, &[], locs) {
                    out.push(LawInstance::RightUnit { m, x: x.clone() });
                }
            }
            3 => {
                for sz in splits(total, &[1, 1, 1]) {
                    for l in computations(sz[0], &[], locs) {
                        for m in computations(sz[1], &scope, locs) {
                            for n in computations(sz[2], &scope, locs) {
                                out.push(LawInstance::Assoc {
                                    l: l.clone(),
                                    x: x.clone(),
                                    m: m.clone(),
                                    y: x.clone(),
                                    n,
                                });
                            }
                        }
                    }
                }
            }
            4 => {
                for &loc in locs {
                    for sz in splits(total, &[1, 1]) {
                        for m in computations(sz[0], &scope, locs) {
                            for w in values(sz[1], &[], locs) {
                                out.push(LawInstance::GetBind { loc, x: x.clone(), m: m.clone(), w });
                            }
                        }
                    }
                }
            }
            5 => {
                for &loc in locs {
                    for sz in splits(total, &[1, 1, 1]) {
                        for v in values(sz[0], &[], locs) {
                            for m in computations(sz[1], &[], locs) {
                                for w in values(sz[2], &[], locs) {
                                    out.push(LawInstance::SetBind { loc, v: v.clone(), m: m.clone(), w });
                                }
                            }
                        }
                    }
                }
            }
            other => panic!("no law {other}"),
        }
    }
    out
}

/// Hand-written get/set instances of laws 4 and 5, including strong updates,
/// reads after writes, and continuations that touch the store themselves.
pub fn handcrafted_instances() -> Vec<LawInstance> {
    let l0 = Location(0);
    let v = |s: &str| Value::Var(s.to_string());
    let id = lam("a", unit(v("a")));
    let konst = lam("a", unit(lam("b", unit(v("a")))));
    let selfapp = lam("a", bind(unit(v("a")), v("a")));
    let reader = lam("a", get(l0, "b", unit(v("b"))));
    let writer = lam("a", set(l0, v("a"), unit(v("a"))));
    let swap = lam("a", get(l0, "b", set(l0, v("a"), unit(v("b")))));
    let conts = [id.clone(), konst.clone(), reader.clone(), writer.clone(), swap.clone(), selfapp.clone()];

    let mut out = Vec::new();
    let get_bodies = [
        unit(v("x")),
        set(l0, v("x"), unit(v("x"))),
        bind(unit(v("x")), v("x")),
        get(l0, "y", unit(v("y"))),
    ];
    for (i, m) in get_bodies.iter().enumerate() {
        for w in conts.iter().skip(i % 2).step_by(2) {
            out.push(LawInstance::GetBind { loc: l0, x: "x".into(), m: m.clone(), w: w.clone() });
        }
    }
    let stored = [id.clone(), konst.clone(), swap.clone()];
    let set_bodies = [
        get(l0, "y", unit(v("y"))),
        unit(id.clone()),
        set(l0, konst.clone(), get(l0, "y", unit(v("y")))),
        bind(get(l0, "y", unit(v("y"))), id.clone()),
    ];
    for (i, m) in set_bodies.iter().enumerate() {
        for (j, w) in conts.iter().enumerate() {
            if (i + j) % 3 == 0 {
                let val = stored[(i + j) % stored.len()].clone();
                out.push(LawInstance::SetBind { loc: l0, v: val, m: m.clone(), w: w.clone() });
            }
        }
    }
    out
}

/// `count` instances of `law` drawn with a fixed seed from the exhaustive
/// instances of total size at most `max_total`.
pub fn sampled_instances(law: u8, max_total: usize, count: usize, seed: u64, locs: &[Location]) -> Vec<LawInstance> {
    let pool = law_instances(law, max_total, locs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(law).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    pool.choose_multiple(&mut rng, count.min(pool.len())).cloned().collect()
}

/// Deterministic sample of `count` items, order preserved.
pub fn sample<T: Clone>(items: &[T], count: usize, seed: u64) -> Vec<T> {
    if count >= items.len() {
        return items.to_vec();
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut keep: Vec<usize> = idx.into_iter().take(count).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| items[i].clone()).collect()
}

// ---------------------------------------------------------------------------
// Law suite

#[derive(Clone, Debug)]
pub struct LawSuite {
    /// Total metavariable size for the exhaustive part.
    pub size: usize,
    /// Output depth of the compared type sets.
    pub depth: usize,
    pub seed: u64,
    /// Extra seeded instances per law, drawn from a larger size bound.
    pub samples: usize,
    pub laws: Vec<u8>,
    pub bounds: Bounds,
}

impl LawSuite {
    pub fn new(size: usize, depth: usize, seed: u64) -> Self {
        LawSuite {
            size,
            depth,
            seed,
            samples: 10,
            laws: vec![1, 2, 3, 4, 5],
            bounds: Bounds::new(3, 2, BTreeSet::from([Location(0)])),
        }
    }

    /// All instances the suite checks for `law`, in a fixed order.
    pub fn instances(&self, law: u8) -> Vec<LawInstance> {
        let locs: Vec<Location> = self.bounds.locs.iter().copied().collect();
        let mut out = law_instances(law, self.size, &locs);
        if law == 5 && out.is_empty() {
            // the smallest closed instance of law 5 has size 6
            out = law_instances(5, self.size.max(6), &locs);
        }
        out.extend(sampled_instances(law, self.size + 2, self.samples, self.seed, &locs));
        if law >= 4 {
            out.extend(handcrafted_instances().into_iter().filter(|i| i.law() == law));
        }
        out
    }

    pub fn run(&self) -> LawReport {
        let mut rows = Vec::new();
        for &law in &self.laws {
            let mut row = LawRow { law, passed: 0, failed: Vec::new() };
            for inst in self.instances(law) {
                match check_law_instance(&inst, self.depth, &self.bounds) {
                    Ok(true) => row.passed += 1,
                    Ok(false) => row.failed.push(inst.to_string()),
                    Err(e) => row.failed.push(format!("{inst}: {e}")),
                }
            }
            rows.push(row);
        }
        LawReport { rows }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LawRow {
    pub law: u8,
    pub passed: usize,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LawReport {
    pub rows: Vec<LawRow>,
}

impl LawReport {
    pub fn ok(&self) -> bool {
        self.rows.iter().all(|r| r.failed.is_empty())
    }

    /// One `STATUS\tdetail` line per law, then one per failing instance.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let status = if r.failed.is_empty() { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{status}\tlaw {}: {} passed, {} failed", r.law, r.passed, r.failed.len());
        }
        for r in &self.rows {
            for f in &r.failed {
                let _ = writeln!(s, "FAIL\t{f}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l0() -> Vec<Location> {
        vec![Location(0)]
    }

    #[test]
    fn smallest_closed_terms() {
        assert!(computations(1, &[], &l0()).is_empty());
        let two = computations(2, &[], &l0());
        assert_eq!(two.len(), 1);
        assert_eq!(two[0].to_string(), r"get(l0, \x0. [x0])");
        for m in closed_computations(4, &l0()) {
            assert!(m.is_closed(), "{m}");
            assert!(m.size() <= 4);
        }
    }

    #[test]
    fn enumeration_is_alpha_distinct() {
        let all = closed_computations(5, &l0());
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert!(!a.alpha_eq(b), "{a} and {b}");
            }
        }
    }

    #[test]
    fn split_shapes() {
        assert_eq!(splits(3, &[1, 1]), vec![vec![1, 2], vec![2, 1]]);
        assert!(splits(1, &[1, 1]).is_empty());
    }

    #[test]
    fn instance_sizes() {
        assert!(law_instances(5, 5, &l0()).is_empty());
        assert!(!law_instances(5, 6, &l0()).is_empty());
        for law in 1..=5 {
            for i in law_instances(law, 6, &l0()) {
                let (a, b) = i.sides().unwrap();
                assert!(a.is_closed() && b.is_closed(), "{i}");
            }
        }
        let hand = handcrafted_instances();
        assert!(hand.len() >= 20, "{}", hand.len());
        for i in &hand {
            let (a, b) = i.sides().unwrap();
            assert!(a.is_closed() && b.is_closed(), "{i}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = sampled_instances(1, 5, 7, 42, &l0());
        let b = sampled_instances(1, 5, 7, 42, &l0());
        assert_eq!(a, b);
        assert_eq!(sample(&[1, 2, 3, 4, 5], 3, 9), sample(&[1, 2, 3, 4, 5], 3, 9));
    }
}
