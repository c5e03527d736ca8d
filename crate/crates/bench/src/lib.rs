//! Fixtures shared by the criterion benches.

use std::collections::BTreeSet;

use limp_core::corpus::closed_computations;
use limp_core::filters::Bounds;
use limp_core::grammar::parse_computation;
use limp_core::syntax::{Computation, Location};
use limp_core::types::{enumerate_atoms, NormalType, Sort};

pub fn bounds() -> Bounds {
    Bounds::new(3, 2, BTreeSet::from([Location(0)]))
}

/// Pairs of two-atom computation types of depth 3.
pub fn type_pairs(n: usize) -> Vec<(NormalType, NormalType)> {
    let atoms = enumerate_atoms(Sort::Computation, 3, &BTreeSet::from([Location(0)])).unwrap();
    let m = atoms.len();
    (0..n)
        .map(|i| {
            let t = |a: usize, b: usize| {
                NormalType::from_atoms(Sort::Computation, [atoms[a % m].clone(), atoms[b % m].clone()])
            };
            (t(i, i * 7 + 1), t(i * 3 + 2, i * 5))
        })
        .collect()
}

pub fn corpus() -> Vec<Computation> {
    closed_computations(4, &[Location(0)])
}

/// `[\x. [x] >>= x] >>= \x. [x] >>= x`, which never terminates.
pub fn omega() -> Computation {
    parse_computation(r"[\x. [x] >>= x] >>= \x. [x] >>= x").unwrap()
}

/// A left-nested chain of `n` binds of the identity over a store write.
pub fn chain(n: usize) -> Computation {
    let mut src = String::from(r"set(l0, \z. [z], get(l0, \x. [x]))");
    for _ in 0..n {
        src = format!(r"({src}) >>= \y. [y]");
    }
    parse_computation(&src).unwrap()
}
