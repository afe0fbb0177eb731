//! Ground truth for the classifier: exhaustive search and DPLL, plus the
//! differential-testing harness built on them.

pub mod difftest;
pub mod minimize;
pub mod theorems;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Assignment, TabularFormula};

/// Largest `n` [`brute_force`] accepts.
pub const BRUTE_FORCE_BOUND: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("brute force refused: n = {n} exceeds {bound}")]
    BoundExceeded { n: usize, bound: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub satisfiable: bool,
    pub witness: Option<Assignment>,
    /// Exact number of models; brute force only.
    pub model_count: Option<u64>,
}

/// Falsifying pattern of each clause as `(mask, value)` over assignment bits.
fn clause_masks(f: &TabularFormula) -> Vec<(u32, u32)> {
    f.clauses()
        .iter()
        .map(|c| {
            c.entries().iter().fold((0, 0), |(m, v), &(var, neg)| {
                let b = 1u32 << var.offset();
                (m | b, if neg { v | b } else { v })
            })
        })
        .collect()
}

fn bits_to_assignment(x: u32, n: usize) -> Assignment {
    Assignment::new((0..n).map(|i| x >> i & 1 == 1).collect())
}

/// Scans all `2^n` assignments. The witness is the first model in counting
/// order, with variable 1 as the least significant bit.
pub fn brute_force(f: &TabularFormula) -> Result<OracleResult, OracleError> {
    let n = f.num_vars();
    if n > BRUTE_FORCE_BOUND {
        return Err(OracleError::BoundExceeded {
            n,
            bound: BRUTE_FORCE_BOUND,
        });
    }
    let masks = clause_masks(f);
    let mut count = 0u64;
    let mut first = None;
    for x in 0..1u32 << n {
        if masks.iter().all(|&(m, v)| x & m != v) {
            count += 1;
            first.get_or_insert(x);
        }
    }
    Ok(OracleResult {
        satisfiable: count > 0,
        witness: first.map(|x| bits_to_assignment(x, n)),
        model_count: Some(count),
    })
}

/// All models, in counting order.
pub fn all_models(f: &TabularFormula) -> Result<Vec<Assignment>, OracleError> {
    let n = f.num_vars();
    if n > BRUTE_FORCE_BOUND {
        return Err(OracleError::BoundExceeded {
            n,
            bound: BRUTE_FORCE_BOUND,
        });
    }
    let masks = clause_masks(f);
    Ok((0..1u32 << n)
        .filter(|&x| masks.iter().all(|&(m, v)| x & m != v))
        .map(|x| bits_to_assignment(x, n))
        .collect())
}

/// Sound and complete DPLL with unit propagation. Branches on the first
/// unassigned variable of the first open clause, trying 0 before 1.
pub fn dpll(f: &TabularFormula) -> OracleResult {
    let n = f.num_vars();
    let clauses: Vec<[(usize, bool); 3]> = f
        .clauses()
        .iter()
        .map(|c| c.entries().map(|(v, neg)| (v.offset(), !neg)))
        .collect();
    let mut vals: Vec<Option<bool>> = vec![None; n];
    let found = search(&clauses, &mut vals);
    let witness = found.then(|| Assignment::new(vals.iter().map(|v| v.unwrap_or(false)).collect()));
    if let Some(w) = &witness {
        assert!(f.evaluate(w).unwrap_or(false), "dpll produced a non-model {w}");
    }
    OracleResult {
        satisfiable: found,
        witness,
        model_count: None,
    }
}

enum Status {
    Conflict,
    Unit(usize, bool),
    Open(usize),
    Satisfied,
}

/// Literals are `(offset, wanted value)`.
fn status(c: &[(usize, bool); 3], vals: &[Option<bool>]) -> Status {
    let mut free = None;
    let mut n_free = 0;
    for &(v, want) in c {
        match vals[v] {
            Some(x) if x == want => return Status::Satisfied,
            Some(_) => {}
            None => {
                n_free += 1;
                free.get_or_insert((v, want));
            }
        }
    }
    match (n_free, free) {
        (0, _) => Status::Conflict,
        (1, Some((v, want))) => Status::Unit(v, want),
        (_, Some((v, _))) => Status::Open(v),
        _ => unreachable!(),
    }
}

fn search(clauses: &[[(usize, bool); 3]], vals: &mut Vec<Option<bool>>) -> bool {
    let mut trail = Vec::new();
    loop {
        let mut unit = None;
        let mut branch = None;
        for c in clauses {
            match status(c, vals) {
                Status::Conflict => {
                    trail.iter().for_each(|&v: &usize| vals[v] = None);
                    return false;
                }
                Status::Unit(v, b) => {
                    unit = Some((v, b));
                    break;
                }
                Status::Open(v) => {
                    branch.get_or_insert(v);
                }
                Status::Satisfied => {}
            }
        }
        match (unit, branch) {
            (Some((v, b)), _) => {
                vals[v] = Some(b);
                trail.push(v);
            }
            (None, None) => return true,
            (None, Some(v)) => {
                for b in [false, true] {
                    vals[v] = Some(b);
                    if search(clauses, vals) {
                        return true;
                    }
                }
                vals[v] = None;
                trail.iter().for_each(|&v| vals[v] = None);
                return false;
            }
        }
    }
}
