//! Delta debugging over clause subsets.

use thiserror::Error;

use crate::formula::{Clause, TabularFormula};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinimizeError {
    #[error("the predicate does not hold on the input")]
    NotReproducing,
    #[error("the predicate gave different answers on the same formula")]
    Flaky,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Minimized {
    pub formula: TabularFormula,
    pub predicate_calls: usize,
    /// Whether variable renumbering was kept.
    pub compacted: bool,
}

struct Counted<'a> {
    pred: &'a dyn Fn(&TabularFormula) -> bool,
    calls: usize,
}

impl Counted<'_> {
    fn test(&mut self, f: &TabularFormula) -> bool {
        self.calls += 1;
        (self.pred)(f)
    }
}

/// Shrinks `f` while `pred` keeps holding: ddmin over clauses, then single
/// clause removal to 1-minimality, then variable compaction if the predicate
/// survives it. The predicate is re-run on the input and the result to
/// detect nondeterminism.
pub fn minimize(f: &TabularFormula, pred: &dyn Fn(&TabularFormula) -> bool) -> Result<Minimized, MinimizeError> {
    let mut p = Counted { pred, calls: 0 };
    let first = p.test(f);
    let second = p.test(f);
    if first != second {
        return Err(MinimizeError::Flaky);
    }
    if !first {
        return Err(MinimizeError::NotReproducing);
    }
    let mut clauses = ddmin(f, f.clauses().to_vec(), &mut p);
    let mut i = 0;
    while i < clauses.len() {
        let mut fewer = clauses.clone();
        fewer.remove(i);
        if p.test(&f.with_clauses(fewer.clone())) {
            clauses = fewer;
        } else {
            i += 1;
        }
    }
    let reduced = f.with_clauses(clauses);
    let compact = reduced.compact_variables();
    let compacted = compact != reduced && p.test(&compact);
    let formula = if compacted { compact } else { reduced };
    if !p.test(&formula) || !p.test(&formula) {
        return Err(MinimizeError::Flaky);
    }
    Ok(Minimized {
        formula,
        predicate_calls: p.calls,
        compacted,
    })
}

fn ddmin(f: &TabularFormula, mut cs: Vec<Clause>, p: &mut Counted) -> Vec<Clause> {
    let mut parts = 2usize;
    while cs.len() >= 2 {
        let chunk = cs.len().div_ceil(parts);
        let subsets: Vec<Vec<Clause>> = cs.chunks(chunk).map(|c| c.to_vec()).collect();
        let mut reduced = false;
        for s in &subsets {
            if p.test(&f.with_clauses(s.clone())) {
                cs = s.clone();
                parts = 2;
                reduced = true;
                break;
            }
        }
        if !reduced && subsets.len() > 2 {
            for i in 0..subsets.len() {
                let complement: Vec<Clause> = subsets
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .flat_map(|(_, s)| s.iter().copied())
                    .collect();
                if p.test(&f.with_clauses(complement.clone())) {
                    cs = complement;
                    parts = (parts - 1).max(2);
                    reduced = true;
                    break;
                }
            }
        }
        if !reduced {
            if parts >= cs.len() {
                break;
            }
            parts = (parts * 2).min(cs.len());
        }
    }
    cs
}
