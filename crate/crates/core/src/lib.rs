//! The imperative λ-calculus λimp with its intersection type system.
//!
//! * [`syntax`]: two-sorted terms, substitution, α-equivalence, sugar.
//! * [`types`]: the four type languages and their normal forms.
//! * [`subtyping`]: decision procedure and saturation oracle.
//! * [`filters`]: principal filters, the monad operations as membership tests.
//! * [`typing`]: derivations, a checker, bounded search, JSON.
//! * [`semantics`]: denotations, the five equations, rewriting, evaluation.
//! * [`grammar`]: concrete syntax for terms and types.
//! * [`corpus`]: enumerated terms and the law suite.

pub mod corpus;
pub mod filters;
pub mod grammar;
pub mod semantics;
pub mod subtyping;
pub mod syntax;
pub mod types;
pub mod typing;

pub use filters::{Bounds, PrincipalFilter};
pub use grammar::{parse_term, parse_type, ParseError};
pub use semantics::{eval_with_store, rewrite_normalize, type_members, Store};
pub use subtyping::{equiv, invert_arrow, leq, ClosureOracle};
pub use syntax::{Computation, Location, Term, Value};
pub use types::{NormalType, Sort, TypeExpr};
pub use typing::{check_derivation, derive_search, enumerate_derivable_types, Context, Derivation, Judgment};
