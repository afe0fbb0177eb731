//! Splitting a tabular formula into CT formulas, one per permutation, and
//! turning each CT formula into its structure.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cts::{render_tiers, Cts, Permutation, Tier, TripletLine};
use crate::formula::{Clause, TabularFormula, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("clause {0:?} is not a compact triplet under its permutation")]
    NotCompact([i32; 3]),
    #[error("clause {0:?} is not part of the formula")]
    UnknownClause([i32; 3]),
    #[error("clause {0:?} is not covered by any CT formula")]
    Uncovered([i32; 3]),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// A CT formula: clauses that are compact triplets under one permutation.
/// Tier masks record the forbidden value patterns; empty tiers are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ctf {
    perm: Arc<Permutation>,
    tiers: Vec<Tier>,
    clauses: Vec<Clause>,
}

impl Ctf {
    pub fn new(perm: Arc<Permutation>) -> Ctf {
        let t = perm.num_tiers();
        Ctf {
            perm,
            tiers: vec![Tier::EMPTY; t],
            clauses: Vec::new(),
        }
    }

    /// Tier index and pattern of `clause` if its variables are consecutive.
    pub fn placement(perm: &Permutation, clause: &Clause) -> Option<(usize, TripletLine)> {
        let mut pos = clause.vars().map(|v| perm.position(v));
        pos.sort_unstable();
        if pos[2] != pos[0] + 2 {
            return None;
        }
        let j = pos[0];
        let [x, y, z] = perm.window(j);
        let mark = |v: VarId| clause.mark_of(v).expect("window covers the clause");
        Some((j, TripletLine::from_bits(mark(x), mark(y), mark(z))))
    }

    pub fn add_clause(&mut self, clause: Clause) -> Result<(), DecomposeError> {
        let (j, line) =
            Ctf::placement(&self.perm, &clause).ok_or(DecomposeError::NotCompact(clause.literals()))?;
        self.tiers[j].insert(line);
        self.clauses.push(clause);
        Ok(())
    }

    pub fn perm(&self) -> &Arc<Permutation> {
        &self.perm
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// The CT formula as an ordinary formula over the same variables.
    pub fn to_formula(&self) -> TabularFormula {
        TabularFormula::new(self.perm.len(), self.clauses.clone()).expect("clauses fit the permutation")
    }

    pub fn render(&self, names: &[String]) -> String {
        render_tiers(&self.perm, &self.tiers, names, false)
    }
}

/// Clauses sharing one unordered variable triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermGroup {
    pub vars: [VarId; 3],
    pub clauses: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub k: usize,
    pub w: usize,
    pub group_sizes: Vec<usize>,
}

impl DecompositionReport {
    /// `ceil(w / (n - 2)) <= k <= m`.
    pub fn bound_holds(&self, n: usize, m: usize) -> bool {
        self.w.div_ceil(n - 2) <= self.k && self.k <= m.max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Strategy {
    /// One CT formula per group, its triple moved to positions 1..3.
    Simple,
    /// Greedy chaining of groups into shared permutations.
    #[default]
    Assemble,
}

/// Groups clauses by variable triple, in order of first appearance.
pub fn group_terms(f: &TabularFormula) -> Vec<TermGroup> {
    let mut index: HashMap<[VarId; 3], usize> = HashMap::new();
    let mut groups: Vec<TermGroup> = Vec::new();
    for (i, c) in f.clauses().iter().enumerate() {
        let vars = c.vars();
        let g = *index.entry(vars).or_insert_with(|| {
            groups.push(TermGroup {
                vars,
                clauses: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].clauses.push(i);
    }
    groups
}

/// A permutation under construction.
struct PartialPerm {
    seq: std::collections::VecDeque<VarId>,
    used: Vec<bool>,
    groups: Vec<usize>,
}

impl PartialPerm {
    fn seeded(n: usize, vars: [VarId; 3]) -> PartialPerm {
        let mut p = PartialPerm {
            seq: Default::default(),
            used: vec![false; n],
            groups: Vec::new(),
        };
        for v in vars {
            p.push_back(v);
        }
        p
    }

    fn push_back(&mut self, v: VarId) {
        self.used[v.offset()] = true;
        self.seq.push_back(v);
    }

    fn push_front(&mut self, v: VarId) {
        self.used[v.offset()] = true;
        self.seq.push_front(v);
    }

    fn free(&self, vars: &[VarId]) -> bool {
        vars.iter().all(|v| !self.used[v.offset()])
    }

    fn room(&self) -> usize {
        self.used.len() - self.seq.len()
    }

    /// All three variables already sit on consecutive positions.
    fn fits_in_place(&self, vars: [VarId; 3]) -> bool {
        let pos: Option<Vec<usize>> = vars
            .iter()
            .map(|v| self.seq.iter().position(|s| s == v))
            .collect();
        match pos {
            Some(mut p) => {
                p.sort_unstable();
                p[2] == p[0] + 2
            }
            None => false,
        }
    }

    /// Places the triple by sharing `overlap` variables with one end.
    fn try_slide(&mut self, vars: [VarId; 3], overlap: usize) -> bool {
        let len = self.seq.len();
        if len < overlap || self.room() < 3 - overlap {
            return false;
        }
        let tail: Vec<VarId> = self.seq.iter().skip(len - overlap).copied().collect();
        let head: Vec<VarId> = self.seq.iter().take(overlap).copied().collect();
        for (end, shared) in [(true, tail), (false, head)] {
            if !shared.iter().all(|v| vars.contains(v)) {
                continue;
            }
            let rest: Vec<VarId> = vars.iter().filter(|v| !shared.contains(v)).copied().collect();
            if rest.len() != 3 - overlap || !self.free(&rest) {
                continue;
            }
            if end {
                rest.iter().for_each(|&v| self.push_back(v));
            } else {
                rest.iter().rev().for_each(|&v| self.push_front(v));
            }
            return true;
        }
        false
    }
}

fn simple_perm(n: usize, vars: [VarId; 3]) -> Permutation {
    let mut order: Vec<VarId> = vars.to_vec();
    order.extend((0..n).map(VarId::from_offset).filter(|v| !vars.contains(v)));
    Permutation::new(order).expect("triple plus the rest is a permutation")
}

/// Decomposes `f` into CT formulas whose conjunction is equivalent to `f`.
/// Every clause lands in exactly one CT formula.
pub fn decompose(f: &TabularFormula, strategy: Strategy) -> (Vec<Ctf>, DecompositionReport) {
    let n = f.num_vars();
    let groups = group_terms(f);
    let report = |k| DecompositionReport {
        k,
        w: groups.len(),
        group_sizes: groups.iter().map(|g| g.clauses.len()).collect(),
    };
    let ctfs: Vec<Ctf> = match strategy {
        Strategy::Simple => groups
            .iter()
            .map(|g| {
                let mut ctf = Ctf::new(Arc::new(simple_perm(n, g.vars)));
                for &i in &g.clauses {
                    ctf.add_clause(f.clauses()[i]).expect("triple sits at positions 1..3");
                }
                ctf
            })
            .collect(),
        Strategy::Assemble => {
            let mut partials: Vec<PartialPerm> = Vec::new();
            for (gi, g) in groups.iter().enumerate() {
                let target = partials
                    .iter()
                    .position(|p| p.fits_in_place(g.vars))
                    .or_else(|| partials.iter_mut().position(|p| p.try_slide(g.vars, 2)))
                    .or_else(|| partials.iter_mut().position(|p| p.try_slide(g.vars, 1)))
                    .or_else(|| {
                        partials.iter_mut().position(|p| {
                            if p.room() >= 3 && p.free(&g.vars) {
                                g.vars.iter().for_each(|&v| p.push_back(v));
                                true
                            } else {
                                false
                            }
                        })
                    });
                match target {
                    Some(t) => partials[t].groups.push(gi),
                    None => {
                        let mut p = PartialPerm::seeded(n, g.vars);
                        p.groups.push(gi);
                        partials.push(p);
                    }
                }
            }
            partials
                .into_iter()
                .map(|mut p| {
                    for v in (0..n).map(VarId::from_offset) {
                        if !p.used[v.offset()] {
                            p.push_back(v);
                        }
                    }
                    let perm = Permutation::new(p.seq.into_iter().collect())
                        .expect("every variable placed once");
                    let mut ctf = Ctf::new(Arc::new(perm));
                    for &gi in &p.groups {
                        for &i in &groups[gi].clauses {
                            ctf.add_clause(f.clauses()[i])
                                .expect("assembled groups occupy consecutive positions");
                        }
                    }
                    ctf
                })
                .collect()
        }
    };
    let report = report(ctfs.len());
    (ctfs, report)
}

/// Complement of each CTF tier, cleared.
pub fn ctf_to_cts(ctf: &Ctf) -> Cts {
    ctf_to_cts_traced(ctf).0
}

/// Like [`ctf_to_cts`], also reporting the first tier that ran empty.
pub fn ctf_to_cts_traced(ctf: &Ctf) -> (Cts, Option<usize>) {
    let tiers: Vec<Tier> = ctf.tiers.iter().map(|t| Tier::from_mask(!t.mask())).collect();
    if let Some(j) = tiers.iter().position(|t| t.is_empty()) {
        return (Cts::empty(ctf.perm.clone()), Some(j));
    }
    Cts::from_raw_tiers(ctf.perm.clone(), tiers)
        .expect("tier count matches")
        .into_cleared()
}

/// Reads an explicit decomposition: `perm <v1> .. <vn>` lines, each followed
/// by the DIMACS clauses (zero-terminated, one per line) of that CT formula.
/// `c` lines are comments. A clause may appear under several permutations,
/// but every clause must belong to `f` and every clause of `f` must appear.
pub fn parse_decomposition(f: &TabularFormula, text: &str) -> Result<Vec<Ctf>, DecomposeError> {
    let known: BTreeSet<Clause> = f.clauses().iter().copied().collect();
    let mut covered: BTreeSet<Clause> = BTreeSet::new();
    let mut ctfs: Vec<Ctf> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        let syntax = |msg: String| DecomposeError::Syntax { line: line_no, msg };
        if let Some(rest) = t.strip_prefix("perm") {
            let idx = rest
                .split_whitespace()
                .map(|s| s.parse::<u32>().map_err(|_| syntax(format!("bad variable `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if idx.len() != f.num_vars() {
                return Err(syntax(format!("permutation has {} entries, expected {}", idx.len(), f.num_vars())));
            }
            let perm = Permutation::from_indices(&idx).map_err(|e| syntax(e.to_string()))?;
            ctfs.push(Ctf::new(Arc::new(perm)));
            continue;
        }
        let lits = t
            .split_whitespace()
            .map(|s| s.parse::<i32>().map_err(|_| syntax(format!("bad literal `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if lits.len() != 4 || lits[3] != 0 {
            return Err(syntax("expected three literals and a terminating 0".into()));
        }
        let clause = Clause::from_literals([lits[0], lits[1], lits[2]]).map_err(|e| syntax(e.to_string()))?;
        if !known.contains(&clause) {
            return Err(DecomposeError::UnknownClause(clause.literals()));
        }
        let ctf = ctfs.last_mut().ok_or_else(|| syntax("clause before the first `perm` line".into()))?;
        ctf.add_clause(clause)?;
        covered.insert(clause);
    }
    if let Some(missing) = known.difference(&covered).next() {
        return Err(DecomposeError::Uncovered(missing.literals()));
    }
    Ok(ctfs)
}
