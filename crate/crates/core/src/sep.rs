//! Systemic effective procedure and the three-way classifier.
//!
//! The first structure supplies the basic graph. Every other structure gets
//! its own hyperstructure over a shared skeleton, and all of them are formed
//! in lockstep: same-name substructures are unified after each step, and an
//! element that empties in one member is removed from all of them.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cts::{default_names, Cts, Permutation, TripletLine};
use crate::decompose::{ctf_to_cts_traced, decompose, Ctf, Strategy};
use crate::formula::{Assignment, TabularFormula};
use crate::hyper::{project_onto, tier0_fixes, walk_routes, BasicGraph, ExtractConfig, HyperError};
use crate::unify::{unify, StructureSystem, UnifyOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SepError {
    #[error("the systemic procedure needs at least two structures")]
    TooFewStructures,
    #[error("structures have different numbers of variables")]
    SizeMismatch,
    #[error(transparent)]
    Hyper(#[from] HyperError),
}

/// When same-name intermediate substructures of a shift are unified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Granularity {
    /// After the concretization and after every projection step.
    #[default]
    Fine,
    /// Only the finished substructure-edges.
    Coarse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SepConfig {
    pub early_check: bool,
    pub granularity: Granularity,
    pub extract: ExtractConfig,
}

impl Default for SepConfig {
    fn default() -> Self {
        SepConfig {
            early_check: true,
            granularity: Granularity::Fine,
            extract: ExtractConfig::default(),
        }
    }
}

/// Member substructures attached to one skeleton element, one per member.
pub type Subs = Vec<Cts>;

/// Hyperstructures of structures 2..k over the pruned basic graph of the
/// first structure.
#[derive(Clone, Debug)]
pub struct HsSystem {
    structures: Vec<Cts>,
    basic: BasicGraph,
    skeleton: BasicGraph,
    vertex_subs: Vec<[Option<Subs>; 8]>,
    edge_subs: Vec<BTreeMap<(u8, u8), Subs>>,
    restarts: usize,
    unify_calls: usize,
}

impl HsSystem {
    /// All structures, the basic one first.
    pub fn structures(&self) -> &[Cts] {
        &self.structures
    }

    pub fn num_members(&self) -> usize {
        self.structures.len() - 1
    }

    pub fn basic(&self) -> &BasicGraph {
        &self.basic
    }

    pub fn skeleton(&self) -> &BasicGraph {
        &self.skeleton
    }

    pub fn num_tiers(&self) -> usize {
        self.skeleton.num_tiers()
    }

    pub fn vertex_subs(&self, j: usize, v: TripletLine) -> Option<&[Cts]> {
        self.vertex_subs[j][v.code() as usize].as_deref()
    }

    pub fn edge_subs(&self, j: usize, u: TripletLine, w: TripletLine) -> Option<&[Cts]> {
        self.edge_subs[j].get(&(u.code(), w.code())).map(|s| s.as_slice())
    }

    /// Substructure-vertices of member `r` at tier `j`.
    fn member_tier(&self, j: usize, r: usize) -> impl Iterator<Item = &Cts> {
        self.vertex_subs[j].iter().flatten().map(move |s| &s[r])
    }

    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn unify_calls(&self) -> usize {
        self.unify_calls
    }

    /// Substructure-vertices of the largest member.
    pub fn vertex_sub_count(&self) -> usize {
        self.vertex_subs.iter().flatten().filter(|s| s.is_some()).count()
    }

    pub fn max_sub_lines(&self) -> usize {
        let v = self.vertex_subs.iter().flatten().flatten().flatten();
        let e = self.edge_subs.iter().flat_map(|m| m.values()).flatten();
        v.chain(e).map(|s| s.line_count()).max().unwrap_or(0)
    }

    pub fn render(&self, names: &[String]) -> String {
        let mut out = self.skeleton.render(names);
        for j in 0..self.num_tiers() {
            for (c, subs) in self.vertex_subs[j].iter().enumerate() {
                for (r, s) in subs.iter().flatten().enumerate() {
                    let _ = write!(
                        out,
                        "\nvertex {} {} member {}\n{}",
                        j + 1,
                        TripletLine::new(c as u8),
                        r + 2,
                        s.render(names)
                    );
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum SepOutcome {
    Complete(HsSystem),
    /// Tier (0-based) that lost its last vertex.
    Empty { tier: usize },
    /// An elementary substructure formed at `tier` encodes a verified
    /// satisfying set. `candidates` lists every such set found at that tier.
    EarlyWitness {
        tier: usize,
        witness: Assignment,
        candidates: Vec<Assignment>,
    },
}

/// The assignment of an elementary `pi`, if `s1` contains it and it
/// satisfies `f`.
pub fn early_elementary_check(pi: &Cts, s1: &Cts, f: &TabularFormula) -> Option<Assignment> {
    let a = pi.elementary_assignment()?;
    (s1.contains_assignment(&a).ok()? && f.evaluate(&a).ok()?).then_some(a)
}

struct Engine<'a> {
    sys: HsSystem,
    cfg: SepConfig,
    formula: Option<&'a TabularFormula>,
}

impl Engine<'_> {
    fn unify_members(&mut self, subs: Subs) -> Option<Subs> {
        if subs.iter().any(|s| s.is_empty()) {
            return None;
        }
        if subs.len() == 1 {
            return Some(subs);
        }
        self.sys.unify_calls += 1;
        match unify(StructureSystem::new(subs)) {
            UnifyOutcome::Unified { system, .. } => Some(system.structures),
            UnifyOutcome::Empty { .. } => None,
        }
    }

    /// Shift of every member along one edge, unified at the configured
    /// granularity. `None` removes the edge.
    fn concordant_shift(&mut self, j: usize, u: TripletLine, w: TripletLine) -> Option<Subs> {
        let fine = self.cfg.granularity == Granularity::Fine;
        let var = self.sys.skeleton.perm().var_at(j + 3);
        let tails = self.sys.vertex_subs[j][u.code() as usize].as_ref()?;
        let mut ps: Subs = tails.iter().map(|t| t.concretize(var, w.bit(2))).collect();
        if fine {
            ps = self.unify_members(ps)?;
        }
        for s in 0..j {
            ps = ps
                .iter()
                .enumerate()
                .map(|(r, p)| project_onto(self.sys.member_tier(s, r), p))
                .collect();
            if ps.iter().any(|p| p.is_empty()) {
                return None;
            }
            if fine {
                ps = self.unify_members(ps)?;
            }
        }
        if fine {
            Some(ps)
        } else {
            self.unify_members(ps)
        }
    }

    fn form_tier(&mut self, j: usize) {
        self.sys.edge_subs[j].clear();
        let edges: Vec<_> = self.sys.skeleton.edges(j).collect();
        for (u, w) in edges {
            match self.concordant_shift(j, u, w) {
                Some(ps) => {
                    self.sys.edge_subs[j].insert((u.code(), w.code()), ps);
                }
                None => self.sys.skeleton.remove_edge(j, u, w),
            }
        }
        self.rebuild_vertices(j + 1);
    }

    fn rebuild_vertices(&mut self, j: usize) {
        let mut subs: [Option<Subs>; 8] = Default::default();
        for (&(u, w), ps) in &self.sys.edge_subs[j - 1] {
            if !self.sys.skeleton.has_edge(j - 1, TripletLine::new(u), TripletLine::new(w)) {
                continue;
            }
            let slot = &mut subs[w as usize];
            *slot = Some(match slot.take() {
                None => ps.clone(),
                Some(acc) => acc
                    .iter()
                    .zip(ps)
                    .map(|(a, p)| a.union(p).expect("members keep their permutations"))
                    .collect(),
            });
        }
        for w in self.sys.skeleton.vertices(j).lines() {
            let unified = subs[w.code() as usize].take().and_then(|s| self.unify_members(s));
            match unified {
                Some(s) => subs[w.code() as usize] = Some(s),
                None => self.sys.skeleton.remove_vertex(j, w),
            }
        }
        self.sys.vertex_subs[j] = subs;
    }

    fn resume_after(&mut self, r: usize) {
        for j in r + 2..self.sys.num_tiers() {
            self.sys.vertex_subs[j] = Default::default();
        }
        for m in self.sys.edge_subs.iter_mut().skip(r + 1) {
            m.clear();
        }
        let skeleton = &self.sys.skeleton;
        self.sys.edge_subs[r].retain(|&(u, w), _| skeleton.has_edge(r, TripletLine::new(u), TripletLine::new(w)));
        self.rebuild_vertices(r + 1);
    }

    fn early_candidates(&self, j: usize) -> Vec<Assignment> {
        let (Some(f), true) = (self.formula, self.cfg.early_check) else {
            return Vec::new();
        };
        let s1 = &self.sys.structures[0];
        let mut out: Vec<Assignment> = Vec::new();
        for subs in self.sys.vertex_subs[j].iter().flatten() {
            for pi in subs {
                if let Some(a) = early_elementary_check(pi, s1, f) {
                    if !out.contains(&a) {
                        out.push(a);
                    }
                }
            }
        }
        out
    }
}

/// Runs the systemic effective procedure on unified `structures`, the first
/// of which is the basic one. With a formula and `cfg.early_check`, stops as
/// soon as an elementary substructure yields a verified satisfying set.
pub fn sep(structures: &[Cts], formula: Option<&TabularFormula>, cfg: SepConfig) -> Result<SepOutcome, SepError> {
    if structures.len() < 2 {
        return Err(SepError::TooFewStructures);
    }
    let n = structures[0].num_vars();
    if structures.iter().any(|s| s.num_vars() != n) {
        return Err(SepError::SizeMismatch);
    }
    let basic = BasicGraph::from_cts(&structures[0])?;
    let t = basic.num_tiers();
    let mut e = Engine {
        sys: HsSystem {
            structures: structures.to_vec(),
            skeleton: basic.clone(),
            basic,
            vertex_subs: vec![Default::default(); t],
            edge_subs: vec![BTreeMap::new(); t.saturating_sub(1)],
            restarts: 0,
            unify_calls: 0,
        },
        cfg,
        formula,
    };
    if structures[1..].iter().any(|s| s.is_empty()) {
        return Ok(SepOutcome::Empty { tier: 0 });
    }
    let perm1: Arc<Permutation> = e.sys.skeleton.perm().clone();
    for v in e.sys.skeleton.vertices(0).lines() {
        let fixes = tier0_fixes(&perm1, v);
        let subs: Subs = structures[1..].iter().map(|s| s.concretize_many(&fixes)).collect();
        match e.unify_members(subs) {
            Some(s) => e.sys.vertex_subs[0][v.code() as usize] = Some(s),
            None => e.sys.skeleton.remove_vertex(0, v),
        }
    }
    let mut fresh = Some(0);
    let mut formed = 0;
    loop {
        let removed = e.sys.skeleton.prune();
        for &(j, v) in &removed {
            e.sys.vertex_subs[j][v.code() as usize] = None;
        }
        if let Some(tier) = e.sys.skeleton.first_empty_tier() {
            return Ok(SepOutcome::Empty { tier });
        }
        if let Some(r) = removed.iter().map(|&(j, _)| j).filter(|&j| j < formed).min() {
            e.sys.restarts += 1;
            e.resume_after(r);
            formed = r + 1;
            fresh = Some(formed);
            continue;
        }
        if let Some(j) = fresh.take() {
            let candidates = e.early_candidates(j);
            if let Some(witness) = candidates.first().cloned() {
                return Ok(SepOutcome::EarlyWitness {
                    tier: j,
                    witness,
                    candidates,
                });
            }
        }
        if formed + 1 == t {
            break;
        }
        e.form_tier(formed);
        formed += 1;
        fresh = Some(formed);
    }
    Ok(SepOutcome::Complete(e.sys))
}

/// Result of the backward walk over a system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemExtraction {
    pub routes: Vec<Vec<TripletLine>>,
    pub assignments: Vec<Assignment>,
    pub backtracks: u64,
    pub budget_exhausted: bool,
}

/// Walks the shared skeleton backwards keeping one running intersection per
/// member. Returned assignments are contained in every structure and, given
/// a formula, satisfy it.
pub fn extract_jss_system(
    sys: &HsSystem,
    formula: Option<&TabularFormula>,
    cfg: ExtractConfig,
) -> SystemExtraction {
    let last = sys.num_tiers() - 1;
    let (routes, backtracks, budget_exhausted) = walk_routes(
        &sys.skeleton,
        cfg,
        |w| sys.vertex_subs(last, w).map(|s| s.to_vec()),
        |acc: &Subs, j, u| {
            let subs = sys.vertex_subs(j, u)?;
            acc.iter()
                .zip(subs)
                .map(|(a, s)| a.intersect(s).ok().filter(|x| !x.is_empty()))
                .collect()
        },
    );
    let assignments = routes
        .iter()
        .map(|r| sys.skeleton.route_assignment(r))
        .filter(|a| {
            sys.structures.iter().all(|s| s.contains_assignment(a).unwrap_or(false))
                && formula.is_none_or(|f| f.evaluate(a).unwrap_or(false))
        })
        .collect();
    SystemExtraction {
        routes,
        assignments,
        backtracks,
        budget_exhausted,
    }
}

/// Pipeline stage that produced an unsatisfiability verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Cts,
    Unify,
    Sep,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Cts => "cts",
            Stage::Unify => "unify",
            Stage::Sep => "sep",
        })
    }
}

/// Everything known when the classifier could not decide.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub reason: String,
    pub n: usize,
    pub k: usize,
    pub permutations: Vec<Vec<u32>>,
    pub skeleton: String,
    pub substructures: String,
    pub routes_found: usize,
    pub backtracks: u64,
    pub budget_exhausted: bool,
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Satisfiable {
        witness: Assignment,
    },
    /// `tier` is 0-based; `None` when the stage has no single tier to blame.
    Unsatisfiable {
        stage: Stage,
        tier: Option<usize>,
    },
    ClassificationFailure {
        diagnostics: Box<Diagnostics>,
    },
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Satisfiable { .. })
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsatisfiable { .. })
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Satisfiable { .. } => 10,
            Verdict::Unsatisfiable { .. } => 20,
            Verdict::ClassificationFailure { .. } => 30,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Satisfiable { .. } => "sat",
            Verdict::Unsatisfiable { .. } => "unsat",
            Verdict::ClassificationFailure { .. } => "failure",
        }
    }
}

/// One-line record: `SATISFIABLE <bits>`, `UNSATISFIABLE stage=<s> [tier=<t>]`
/// with a 1-based tier, or `CLASSIFICATION FAILURE <reason>`.
impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Satisfiable { witness } => write!(f, "SATISFIABLE {witness}"),
            Verdict::Unsatisfiable { stage, tier: Some(t) } => {
                write!(f, "UNSATISFIABLE stage={stage} tier={}", t + 1)
            }
            Verdict::Unsatisfiable { stage, tier: None } => write!(f, "UNSATISFIABLE stage={stage}"),
            Verdict::ClassificationFailure { diagnostics } => {
                write!(f, "CLASSIFICATION FAILURE {}", diagnostics.reason)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassifyConfig {
    pub strategy: Strategy,
    pub sep: SepConfig,
}

/// Counters gathered along the pipeline.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyStats {
    pub k: usize,
    pub w: usize,
    pub unify_waves: usize,
    pub sep_unify_calls: usize,
    pub restarts: usize,
    pub backtracks: u64,
    pub early_tier: Option<usize>,
    pub vertex_subs: usize,
    pub max_sub_lines: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub verdict: Verdict,
    pub stats: ClassifyStats,
}

/// Classifies `f` with the default configuration.
pub fn classify(f: &TabularFormula) -> Verdict {
    classify_with(f, &ClassifyConfig::default()).verdict
}

pub fn classify_with(f: &TabularFormula, cfg: &ClassifyConfig) -> Classification {
    let f = f.canonicalize();
    let (ctfs, report) = decompose(&f, cfg.strategy);
    let mut c = classify_with_decomposition(&f, &ctfs, cfg);
    c.stats.w = report.w;
    c
}

/// Classifies `f` given its CT formulas, skipping decomposition.
pub fn classify_with_decomposition(f: &TabularFormula, ctfs: &[Ctf], cfg: &ClassifyConfig) -> Classification {
    let mut stats = ClassifyStats {
        k: ctfs.len(),
        ..Default::default()
    };
    let verdict = run_pipeline(f, ctfs, cfg, &mut stats);
    if let Verdict::Satisfiable { witness } = &verdict {
        assert!(
            f.evaluate(witness).unwrap_or(false),
            "classifier produced an unverified witness {witness}"
        );
    }
    Classification { verdict, stats }
}

fn satisfiable_if_verified(f: &TabularFormula, a: Assignment, reason: &str, diag: Diagnostics) -> Verdict {
    if f.evaluate(&a).unwrap_or(false) {
        Verdict::Satisfiable { witness: a }
    } else {
        Verdict::ClassificationFailure {
            diagnostics: Box::new(Diagnostics {
                reason: format!("{reason}: candidate {a} does not satisfy the formula"),
                ..diag
            }),
        }
    }
}

fn run_pipeline(f: &TabularFormula, ctfs: &[Ctf], cfg: &ClassifyConfig, stats: &mut ClassifyStats) -> Verdict {
    let n = f.num_vars();
    let base = Diagnostics {
        n,
        k: ctfs.len(),
        permutations: ctfs
            .iter()
            .map(|c| c.perm().order().iter().map(|v| v.index()).collect())
            .collect(),
        ..Default::default()
    };
    if ctfs.is_empty() {
        return satisfiable_if_verified(f, Assignment::zeros(n), "no clauses", base);
    }
    let mut structures = Vec::with_capacity(ctfs.len());
    for ctf in ctfs {
        let (s, empty_at) = ctf_to_cts_traced(ctf);
        if s.is_empty() {
            return Verdict::Unsatisfiable {
                stage: Stage::Cts,
                tier: empty_at,
            };
        }
        structures.push(s);
    }
    if structures.len() == 1 {
        return match structures[0].any_assignment() {
            Some(a) => satisfiable_if_verified(f, a, "single structure", base),
            None => Verdict::Unsatisfiable {
                stage: Stage::Cts,
                tier: None,
            },
        };
    }
    let unified = unify(StructureSystem::new(structures));
    stats.unify_waves = unified.waves();
    let structures = match unified {
        UnifyOutcome::Unified { system, .. } => system.structures,
        UnifyOutcome::Empty { .. } => {
            return Verdict::Unsatisfiable {
                stage: Stage::Unify,
                tier: None,
            }
        }
    };
    let outcome = match sep(&structures, Some(f), cfg.sep) {
        Ok(o) => o,
        Err(e) => {
            return Verdict::ClassificationFailure {
                diagnostics: Box::new(Diagnostics {
                    reason: e.to_string(),
                    ..base
                }),
            }
        }
    };
    let sys = match outcome {
        SepOutcome::Empty { tier } => {
            return Verdict::Unsatisfiable {
                stage: Stage::Sep,
                tier: Some(tier),
            }
        }
        SepOutcome::EarlyWitness { tier, witness, .. } => {
            stats.early_tier = Some(tier);
            return satisfiable_if_verified(f, witness, "early check", base);
        }
        SepOutcome::Complete(sys) => sys,
    };
    stats.sep_unify_calls = sys.unify_calls();
    stats.restarts = sys.restarts();
    stats.vertex_subs = sys.vertex_sub_count();
    stats.max_sub_lines = sys.max_sub_lines();
    let x = extract_jss_system(&sys, Some(f), cfg.sep.extract);
    stats.backtracks = x.backtracks;
    match x.assignments.into_iter().next() {
        Some(a) => satisfiable_if_verified(f, a, "extraction", base),
        None => {
            let names = default_names(n);
            Verdict::ClassificationFailure {
                diagnostics: Box::new(Diagnostics {
                    reason: if x.budget_exhausted {
                        "route extraction exhausted its backtrack budget".into()
                    } else {
                        "no verified route in a non-empty system".into()
                    },
                    skeleton: sys.skeleton().render(&names),
                    substructures: sys.render(&names),
                    routes_found: x.routes.len(),
                    backtracks: x.backtracks,
                    budget_exhausted: x.budget_exhausted,
                    restarts: sys.restarts(),
                    ..base
                }),
            }
        }
    }
}
