//! Empirical checks of the route and system equivalences on random systems.
//!
//! Each system is a set of random CT formulas, one per random permutation.
//! Their union is the formula whose models are the joint satisfying sets.
//! For pairs the effective procedure must be non-empty exactly when a joint
//! satisfying set exists, and its routes must be those sets; for every
//! system the systemic procedure must be non-empty exactly when the formula
//! is satisfiable. Violations are findings, not errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::all_models;
use crate::cts::{Cts, Permutation, TripletLine};
use crate::decompose::{ctf_to_cts, Ctf};
use crate::formula::{Assignment, Clause, TabularFormula};
use crate::hyper::{effective_procedure, extract_jss, EpOutcome, ExtractConfig, Hyperstructure};
use crate::sep::{extract_jss_system, sep, HsSystem, SepConfig, SepOutcome};
use crate::unify::{unify, StructureSystem, UnifyOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub k_max: usize,
    pub seed: u64,
    pub backtrack_budget: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            count: 2000,
            n_min: 5,
            n_max: 10,
            k_max: 4,
            seed: 0,
            backtrack_budget: 100_000,
        }
    }
}

/// Random CT formulas for system `index`: `k` cycles through `2..=k_max`,
/// each formula gets `n/2..=2n` random compact clauses.
pub fn random_system(params: &SweepParams, index: usize) -> (TabularFormula, Vec<Ctf>) {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(index as u64));
    let n = rng.random_range(params.n_min..=params.n_max);
    let k = 2 + index % (params.k_max - 1);
    let mut ctfs = Vec::with_capacity(k);
    let mut all: BTreeSet<Clause> = BTreeSet::new();
    for _ in 0..k {
        let mut order: Vec<u32> = (1..=n as u32).collect();
        order.shuffle(&mut rng);
        let perm = Arc::new(Permutation::from_indices(&order).expect("shuffled identity"));
        let mut ctf = Ctf::new(perm.clone());
        for _ in 0..rng.random_range(n / 2..=2 * n) {
            let j = rng.random_range(0..perm.num_tiers());
            let line = TripletLine::new(rng.random_range(0..8));
            if ctf.tiers()[j].contains(line) {
                continue;
            }
            let w = perm.window(j);
            let c = Clause::new([(w[0], line.bit(0)), (w[1], line.bit(1)), (w[2], line.bit(2))])
                .expect("window variables are distinct");
            ctf.add_clause(c).expect("clause sits on tier j");
            all.insert(c);
        }
        ctfs.push(ctf);
    }
    let f = TabularFormula::new(n, all.into_iter().collect()).expect("clauses use 1..=n");
    (f, ctfs)
}

/// Decomposition file text for `ctfs`, readable by `parse_decomposition`.
pub fn decomposition_text(ctfs: &[Ctf]) -> String {
    let mut out = String::new();
    for c in ctfs {
        let order: Vec<String> = c.perm().order().iter().map(|v| v.index().to_string()).collect();
        out.push_str(&format!("perm {}\n", order.join(" ")));
        for cl in c.clauses() {
            let [a, b, d] = cl.literals();
            out.push_str(&format!("{a} {b} {d} 0\n"));
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub index: usize,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub models: usize,
    /// A structure or the unified system was already empty.
    pub trivially_empty: bool,
    pub joint_set_mismatch: bool,
    pub ep_nonempty: Option<bool>,
    pub routes: Option<usize>,
    pub sep_nonempty: Option<bool>,
    pub sep_ep_consistent: Option<bool>,
    pub system_route_found: Option<bool>,
    pub backtracks: u64,
    pub budget_exhausted: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepViolation {
    pub index: usize,
    pub kinds: Vec<String>,
    pub n: usize,
    pub k: usize,
    pub models: usize,
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub params: SweepParams,
    pub systems: usize,
    pub by_k: BTreeMap<usize, usize>,
    pub satisfiable: usize,
    pub trivially_empty: usize,
    /// Systems that survived unification.
    pub unified: usize,
    pub pair_equivalence_checked: usize,
    pub pair_equivalence_violations: usize,
    pub route_bijection_checked: usize,
    pub route_bijection_violations: usize,
    pub system_equivalence_checked: usize,
    pub system_equivalence_violations: usize,
    pub sep_ep_mismatches: usize,
    pub joint_set_mismatches: usize,
    pub extraction_misses: usize,
    pub backtracks_total: u64,
    pub backtracks_max: u64,
    /// Backtrack count to number of extractions with that count.
    pub backtrack_histogram: BTreeMap<u64, usize>,
    pub budget_exhausted: usize,
    pub violations: Vec<SweepViolation>,
}

fn same_hyperstructures(h: &Hyperstructure, s: &HsSystem) -> bool {
    if h.skeleton() != s.skeleton() {
        return false;
    }
    (0..h.num_tiers()).all(|j| {
        (0..8u8).map(TripletLine::new).all(|v| match (h.vertex_sub(j, v), s.vertex_subs(j, v)) {
            (None, None) => true,
            (Some(a), Some(b)) => std::slice::from_ref(a) == b,
            _ => false,
        })
    })
}

fn check_system(params: &SweepParams, index: usize) -> SystemRecord {
    let (f, ctfs) = random_system(params, index);
    let n = f.num_vars();
    let models: BTreeSet<Assignment> = all_models(&f).expect("n within the brute force bound").into_iter().collect();
    let mut r = SystemRecord {
        index,
        n,
        k: ctfs.len(),
        m: f.num_clauses(),
        models: models.len(),
        ..Default::default()
    };
    let structures: Vec<Cts> = ctfs.iter().map(ctf_to_cts).collect();
    let joint: BTreeSet<Assignment> = structures[0]
        .enumerate_assignments()
        .expect("n within the enumeration bound")
        .into_iter()
        .filter(|a| structures[1..].iter().all(|s| s.contains_assignment(a).unwrap_or(false)))
        .collect();
    if joint != models {
        r.joint_set_mismatch = true;
        r.violations.push("joint_set".into());
    }
    let unified = match unify(StructureSystem::new(structures)) {
        UnifyOutcome::Unified { system, .. } => system.structures,
        UnifyOutcome::Empty { .. } => {
            r.trivially_empty = true;
            if !models.is_empty() {
                r.violations.push("unify_lost_models".into());
            }
            return r;
        }
    };
    let extract = ExtractConfig {
        limit: usize::MAX,
        backtrack_budget: params.backtrack_budget,
    };
    let mut ep_h = None;
    if unified.len() == 2 {
        let ep = effective_procedure(&unified[0], &unified[1]).expect("non-empty inputs");
        let nonempty = matches!(ep, EpOutcome::Formed(_));
        r.ep_nonempty = Some(nonempty);
        if nonempty != !models.is_empty() {
            r.violations.push("pair_equivalence".into());
        }
        if let EpOutcome::Formed(h) = ep {
            match extract_jss(&h, extract) {
                Ok(x) => {
                    r.routes = Some(x.routes.len());
                    r.backtracks += x.backtracks;
                    r.budget_exhausted |= x.budget_exhausted;
                    let found: BTreeSet<Assignment> = x.assignments.into_iter().collect();
                    if !x.budget_exhausted && found != models {
                        r.violations.push("route_bijection".into());
                    }
                }
                Err(_) => {
                    r.routes = Some(0);
                    r.violations.push("route_bijection".into());
                }
            }
            ep_h = Some(h);
        }
    }
    let cfg = SepConfig {
        early_check: false,
        ..Default::default()
    };
    match sep(&unified, Some(&f), cfg).expect("at least two structures") {
        SepOutcome::Complete(sys) => {
            r.sep_nonempty = Some(true);
            if models.is_empty() {
                r.violations.push("system_equivalence".into());
            }
            if let Some(h) = &ep_h {
                let same = same_hyperstructures(h, &sys);
                r.sep_ep_consistent = Some(same);
                if !same {
                    r.violations.push("sep_ep".into());
                }
            } else if r.ep_nonempty.is_some() {
                r.sep_ep_consistent = Some(false);
                r.violations.push("sep_ep".into());
            }
            let x = extract_jss_system(&sys, Some(&f), ExtractConfig { limit: 1, ..extract });
            r.backtracks += x.backtracks;
            r.budget_exhausted |= x.budget_exhausted;
            r.system_route_found = Some(!x.assignments.is_empty());
            if x.assignments.iter().any(|a| !models.contains(a)) {
                r.violations.push("extraction_soundness".into());
            }
        }
        SepOutcome::Empty { .. } => {
            r.sep_nonempty = Some(false);
            if !models.is_empty() {
                r.violations.push("system_equivalence".into());
            }
            if let Some(e) = r.ep_nonempty {
                r.sep_ep_consistent = Some(!e);
                if e {
                    r.violations.push("sep_ep".into());
                }
            }
        }
        SepOutcome::EarlyWitness { .. } => unreachable!("early check disabled"),
    }
    r
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub records: Vec<SystemRecord>,
}

/// Checks `params.count` systems in parallel. With `out`, each violating
/// system is archived under `out/findings/<index>-theorems/`.
pub fn theorem_sweep(params: &SweepParams, out: Option<&Path>) -> io::Result<SweepOutcome> {
    assert!(params.k_max >= 2 && params.n_min >= 3 && params.n_min <= params.n_max);
    let records: Vec<SystemRecord> = (0..params.count)
        .into_par_iter()
        .map(|i| check_system(params, i))
        .collect();
    let mut rep = SweepReport {
        params: params.clone(),
        systems: records.len(),
        by_k: BTreeMap::new(),
        satisfiable: 0,
        trivially_empty: 0,
        unified: 0,
        pair_equivalence_checked: 0,
        pair_equivalence_violations: 0,
        route_bijection_checked: 0,
        route_bijection_violations: 0,
        system_equivalence_checked: 0,
        system_equivalence_violations: 0,
        sep_ep_mismatches: 0,
        joint_set_mismatches: 0,
        extraction_misses: 0,
        backtracks_total: 0,
        backtracks_max: 0,
        backtrack_histogram: BTreeMap::new(),
        budget_exhausted: 0,
        violations: Vec::new(),
    };
    let has = |r: &SystemRecord, k: &str| r.violations.iter().any(|v| v == k);
    for r in &records {
        *rep.by_k.entry(r.k).or_default() += 1;
        rep.satisfiable += usize::from(r.models > 0);
        rep.trivially_empty += usize::from(r.trivially_empty);
        rep.unified += usize::from(!r.trivially_empty);
        rep.pair_equivalence_checked += usize::from(r.ep_nonempty.is_some());
        rep.pair_equivalence_violations += usize::from(has(r, "pair_equivalence"));
        rep.route_bijection_checked += usize::from(r.routes.is_some());
        rep.route_bijection_violations += usize::from(has(r, "route_bijection"));
        rep.system_equivalence_checked += usize::from(r.sep_nonempty.is_some());
        rep.system_equivalence_violations += usize::from(has(r, "system_equivalence"));
        rep.sep_ep_mismatches += usize::from(has(r, "sep_ep"));
        rep.joint_set_mismatches += usize::from(r.joint_set_mismatch);
        rep.extraction_misses += usize::from(r.system_route_found == Some(false) && r.models > 0);
        rep.backtracks_total += r.backtracks;
        rep.backtracks_max = rep.backtracks_max.max(r.backtracks);
        if r.sep_nonempty == Some(true) {
            *rep.backtrack_histogram.entry(r.backtracks).or_default() += 1;
        }
        rep.budget_exhausted += usize::from(r.budget_exhausted);
        if !r.violations.is_empty() {
            let dir = format!("findings/{:06}-theorems", r.index);
            if let Some(out) = out {
                let (f, ctfs) = random_system(params, r.index);
                let d = out.join(&dir);
                fs::create_dir_all(&d)?;
                fs::write(d.join("formula.cnf"), f.to_dimacs())?;
                fs::write(d.join("system.decomp"), decomposition_text(&ctfs))?;
                fs::write(
                    d.join("record.json"),
                    serde_json::to_string_pretty(r).expect("record serializes") + "\n",
                )?;
            }
            rep.violations.push(SweepViolation {
                index: r.index,
                kinds: r.violations.clone(),
                n: r.n,
                k: r.k,
                models: r.models,
                dir,
            });
        }
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(
            out.join("theorems.json"),
            serde_json::to_string_pretty(&rep).expect("report serializes") + "\n",
        )?;
    }
    Ok(SweepOutcome { report: rep, records })
}
