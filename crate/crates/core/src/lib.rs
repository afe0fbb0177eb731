//! Compact-triplet structures for 3-SAT.
//!
//! A 3-CNF formula is split into CT formulas, each compact under its own
//! variable permutation. Each CT formula becomes a compact-triplet structure
//! encoding exactly its satisfying sets. The structures are unified and
//! combined through hyperstructures into a three-way verdict, and a
//! differential-testing harness checks that verdict against DPLL.

pub mod cli;
pub mod cts;
pub mod decompose;
pub mod formula;
pub mod hyper;
pub mod oracle;
pub mod sep;
pub mod trace;
pub mod unify;

pub use cts::{Cts, Permutation, Tier, TripletLine};
pub use formula::{parse_dimacs, Assignment, Clause, TabularFormula, VarId};
pub use sep::{classify, Verdict};
