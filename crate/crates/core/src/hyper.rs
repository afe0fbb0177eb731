//! Basic graphs, hyperstructures and joint satisfying sets of two structures.
//!
//! The basic graph is the first structure drawn as a tiered graph: one vertex
//! per line, an edge between compatible lines of adjacent tiers. A
//! hyperstructure attaches a substructure of the second structure to every
//! vertex and edge of a copy of that graph. It is formed tier by tier:
//! tier-0 vertices get the second structure concretized by their three
//! values, an edge gets its tail's substructure concretized by the head's new
//! value and then filtered through every earlier tier, and a vertex gets the
//! union of its incoming edges. Elements with empty substructures are
//! removed, and so is anything left without a neighbour on both sides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::cts::{Cts, CtsError, Permutation, Tier, TripletLine};
use crate::formula::{Assignment, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HyperError {
    #[error("the basic structure is empty")]
    EmptyInput,
    #[error("structures have different numbers of variables")]
    SizeMismatch,
    #[error("no route survives in a non-empty hyperstructure ({backtracks} backtracks)")]
    ExtractionFailed { backtracks: u64 },
    #[error(transparent)]
    Cts(#[from] CtsError),
}

/// Tiered graph of a structure. Vertices are identified by `(tier, code)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicGraph {
    perm: Arc<Permutation>,
    vertices: Vec<Tier>,
    /// `edges[j][u]` is the mask of successors of `u` at tier `j + 1`.
    edges: Vec<[u8; 8]>,
}

impl BasicGraph {
    pub fn from_cts(s: &Cts) -> Result<BasicGraph, HyperError> {
        if s.is_empty() {
            return Err(HyperError::EmptyInput);
        }
        let vertices = s.tiers().to_vec();
        let edges = vertices
            .windows(2)
            .map(|w| {
                let mut row = [0u8; 8];
                for u in w[0].lines() {
                    row[u.code() as usize] = w[1]
                        .lines()
                        .filter(|&v| u.compatible(v))
                        .fold(0, |m, v| m | 1 << v.code());
                }
                row
            })
            .collect();
        Ok(BasicGraph {
            perm: s.perm().clone(),
            vertices,
            edges,
        })
    }

    pub fn perm(&self) -> &Arc<Permutation> {
        &self.perm
    }

    pub fn num_tiers(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self, j: usize) -> Tier {
        self.vertices[j]
    }

    pub fn has_vertex(&self, j: usize, v: TripletLine) -> bool {
        self.vertices[j].contains(v)
    }

    pub fn successors(&self, j: usize, u: TripletLine) -> Tier {
        Tier::from_mask(self.edges[j][u.code() as usize])
    }

    pub fn predecessors(&self, j: usize, w: TripletLine) -> Tier {
        let row = &self.edges[j - 1];
        Tier::from_mask((0..8).filter(|&u| row[u] >> w.code() & 1 == 1).fold(0, |m, u| m | 1 << u))
    }

    pub fn has_edge(&self, j: usize, u: TripletLine, w: TripletLine) -> bool {
        self.edges[j][u.code() as usize] >> w.code() & 1 == 1
    }

    /// Edges between tier `j` and `j + 1`, ordered by tail then head.
    pub fn edges(&self, j: usize) -> impl Iterator<Item = (TripletLine, TripletLine)> + '_ {
        (0..8u8).flat_map(move |u| {
            Tier::from_mask(self.edges[j][u as usize])
                .lines()
                .map(move |w| (TripletLine::new(u), w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().flatten().map(|m| m.count_ones() as usize).sum()
    }

    pub fn tier_counts(&self) -> Vec<usize> {
        self.vertices.iter().map(|t| t.len()).collect()
    }

    pub fn first_empty_tier(&self) -> Option<usize> {
        self.vertices.iter().position(|t| t.is_empty())
    }

    pub fn remove_edge(&mut self, j: usize, u: TripletLine, w: TripletLine) {
        self.edges[j][u.code() as usize] &= !(1 << w.code());
    }

    pub fn remove_vertex(&mut self, j: usize, v: TripletLine) {
        self.vertices[j].remove(v);
        if j + 1 < self.num_tiers() {
            self.edges[j][v.code() as usize] = 0;
        }
        if j > 0 {
            for row in self.edges[j - 1].iter_mut() {
                *row &= !(1 << v.code());
            }
        }
    }

    /// Removes vertices lacking a neighbour in an adjacent tier until none
    /// remain. Returns the removed vertices in removal order.
    pub fn prune(&mut self) -> Vec<(usize, TripletLine)> {
        let mut removed = Vec::new();
        loop {
            let before = removed.len();
            for j in 0..self.num_tiers() {
                for v in self.vertices[j].lines() {
                    let no_pred = j > 0 && self.predecessors(j, v).is_empty();
                    let no_succ = j + 1 < self.num_tiers() && self.successors(j, v).is_empty();
                    if no_pred || no_succ {
                        self.remove_vertex(j, v);
                        removed.push((j, v));
                    }
                }
            }
            if removed.len() == before {
                return removed;
            }
        }
    }

    /// Number of routes, counted by dynamic programming.
    pub fn route_count(&self) -> u128 {
        let mut ways = [0u128; 8];
        for v in self.vertices[0].lines() {
            ways[v.code() as usize] = 1;
        }
        for j in 1..self.num_tiers() {
            let mut next = [0u128; 8];
            for w in self.vertices[j].lines() {
                next[w.code() as usize] = self
                    .predecessors(j, w)
                    .lines()
                    .map(|u| ways[u.code() as usize])
                    .sum();
            }
            ways = next;
        }
        ways.iter().sum()
    }

    /// Assignment spelled by one vertex per tier.
    pub fn route_assignment(&self, route: &[TripletLine]) -> Assignment {
        let mut a = Assignment::zeros(self.perm.len());
        for (j, line) in route.iter().enumerate() {
            for (k, v) in self.perm.window(j).into_iter().enumerate() {
                a.set(v, line.bit(k));
            }
        }
        a
    }

    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        for j in 0..self.num_tiers() {
            let vars: Vec<&str> = self.perm.window(j).iter().map(|v| names[v.offset()].as_str()).collect();
            let codes: Vec<String> = self.vertices[j].lines().map(|l| l.to_string()).collect();
            let _ = writeln!(out, "tier {} [{}]: {}", j + 1, vars.join(" "), codes.join(" "));
        }
        for j in 0..self.num_tiers().saturating_sub(1) {
            let edges: Vec<String> = self.edges(j).map(|(u, w)| format!("{u}-{w}")).collect();
            let _ = writeln!(out, "edges {}-{}: {}", j + 1, j + 2, edges.join(" "));
        }
        out
    }
}

/// Basic graph whose vertices and edges carry substructures of a second
/// structure.
#[derive(Clone, Debug)]
pub struct Hyperstructure {
    first: Cts,
    second: Cts,
    basic: BasicGraph,
    skeleton: BasicGraph,
    vertex_subs: Vec<[Option<Cts>; 8]>,
    edge_subs: Vec<BTreeMap<(u8, u8), Cts>>,
    restarts: usize,
}

/// Result of the effective procedure.
#[derive(Clone, Debug)]
pub enum EpOutcome {
    Formed(Box<Hyperstructure>),
    /// Tier (0-based) that lost its last vertex.
    Empty { tier: usize },
}

impl EpOutcome {
    pub fn hyperstructure(&self) -> Option<&Hyperstructure> {
        match self {
            EpOutcome::Formed(h) => Some(h.as_ref()),
            EpOutcome::Empty { .. } => None,
        }
    }
}

impl Hyperstructure {
    pub fn first(&self) -> &Cts {
        &self.first
    }

    pub fn second(&self) -> &Cts {
        &self.second
    }

    /// The unpruned basic graph of the first structure.
    pub fn basic(&self) -> &BasicGraph {
        &self.basic
    }

    /// The pruned basic graph the substructures hang on.
    pub fn skeleton(&self) -> &BasicGraph {
        &self.skeleton
    }

    pub fn num_tiers(&self) -> usize {
        self.skeleton.num_tiers()
    }

    pub fn vertex_sub(&self, j: usize, v: TripletLine) -> Option<&Cts> {
        self.vertex_subs[j][v.code() as usize].as_ref()
    }

    pub fn edge_sub(&self, j: usize, u: TripletLine, w: TripletLine) -> Option<&Cts> {
        self.edge_subs[j].get(&(u.code(), w.code()))
    }

    /// Substructure-vertices of tier `j`, ascending by code.
    pub fn tier_subs(&self, j: usize) -> impl Iterator<Item = (TripletLine, &Cts)> {
        self.vertex_subs[j]
            .iter()
            .enumerate()
            .filter_map(|(c, s)| s.as_ref().map(|s| (TripletLine::new(c as u8), s)))
    }

    /// How many times formation resumed at an earlier tier after pruning.
    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn vertex_sub_count(&self) -> usize {
        self.vertex_subs.iter().flatten().filter(|s| s.is_some()).count()
    }

    pub fn edge_sub_count(&self) -> usize {
        self.edge_subs.iter().map(|m| m.len()).sum()
    }

    /// Largest line count over all stored substructures.
    pub fn max_sub_lines(&self) -> usize {
        let v = self.vertex_subs.iter().flatten().flatten().map(|s| s.line_count());
        let e = self.edge_subs.iter().flat_map(|m| m.values()).map(|s| s.line_count());
        v.chain(e).max().unwrap_or(0)
    }

    /// Checks that same-tier substructure-vertices are pairwise disjoint and
    /// that every stored substructure belongs to a skeleton element.
    pub fn check_invariants(&self) -> Result<(), String> {
        for j in 0..self.num_tiers() {
            let subs: Vec<_> = self.tier_subs(j).collect();
            for (v, _) in &subs {
                if !self.skeleton.has_vertex(j, *v) {
                    return Err(format!("tier {j}: substructure on removed vertex {v}"));
                }
            }
            for (a, (va, sa)) in subs.iter().enumerate() {
                for (vb, sb) in &subs[a + 1..] {
                    if !sa.intersect(sb).map_err(|e| e.to_string())?.is_empty() {
                        return Err(format!("tier {j}: {va} and {vb} intersect"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn render(&self, names: &[String]) -> String {
        let mut out = self.skeleton.render(names);
        for j in 0..self.num_tiers() {
            for (v, s) in self.tier_subs(j) {
                let _ = write!(out, "\nvertex {} {}\n{}", j + 1, v, s.render(names));
            }
        }
        out
    }
}

/// Union over the substructure-vertices `π` of tier `r` of `π ∩ target`.
pub fn project_tier(h: &Hyperstructure, r: usize, target: &Cts) -> Cts {
    project_onto(h.tier_subs(r).map(|(_, s)| s), target)
}

pub(crate) fn project_onto<'a>(subs: impl Iterator<Item = &'a Cts>, target: &Cts) -> Cts {
    let mut acc = Cts::empty(target.perm().clone());
    for s in subs {
        let part = s.intersect(target).expect("substructures share a permutation");
        acc = acc.union(&part).expect("substructures share a permutation");
    }
    acc
}

/// Substructure-edge for `u` at tier `j` and `w` at tier `j + 1`: the tail's
/// substructure concretized by the head's last value, then projected onto
/// tiers `0..j` in order.
pub fn shift(h: &Hyperstructure, j: usize, u: TripletLine, w: TripletLine) -> Cts {
    let Some(tail) = h.vertex_sub(j, u) else {
        return Cts::empty(h.second.perm().clone());
    };
    let var = h.skeleton.perm().var_at(j + 3);
    let mut p = tail.concretize(var, w.bit(2));
    for s in 0..j {
        if p.is_empty() {
            break;
        }
        p = project_tier(h, s, &p);
    }
    p
}

/// The three values of tier-0 vertex `v` as concretizations.
pub(crate) fn tier0_fixes(perm: &Permutation, v: TripletLine) -> [(VarId, bool); 3] {
    let w = perm.window(0);
    [(w[0], v.bit(0)), (w[1], v.bit(1)), (w[2], v.bit(2))]
}

/// Forms the hyperstructure of `s1` (basic) and `s2`.
pub fn effective_procedure(s1: &Cts, s2: &Cts) -> Result<EpOutcome, HyperError> {
    if s1.num_vars() != s2.num_vars() {
        return Err(HyperError::SizeMismatch);
    }
    let basic = BasicGraph::from_cts(s1)?;
    let t = basic.num_tiers();
    let mut h = Hyperstructure {
        first: s1.clone(),
        second: s2.clone(),
        skeleton: basic.clone(),
        basic,
        vertex_subs: vec![Default::default(); t],
        edge_subs: vec![BTreeMap::new(); t.saturating_sub(1)],
        restarts: 0,
    };
    if s2.is_empty() {
        return Ok(EpOutcome::Empty { tier: 0 });
    }
    for v in h.skeleton.vertices(0).lines() {
        let sub = s2.concretize_many(&tier0_fixes(h.skeleton.perm(), v));
        if sub.is_empty() {
            h.skeleton.remove_vertex(0, v);
        } else {
            h.vertex_subs[0][v.code() as usize] = Some(sub);
        }
    }
    // Tiers 0..=formed carry substructures.
    let mut formed = 0;
    loop {
        let removed = h.skeleton.prune();
        for &(j, v) in &removed {
            h.vertex_subs[j][v.code() as usize] = None;
        }
        if let Some(tier) = h.skeleton.first_empty_tier() {
            return Ok(EpOutcome::Empty { tier });
        }
        if let Some(r) = removed.iter().map(|&(j, _)| j).filter(|&j| j < formed).min() {
            h.restarts += 1;
            resume_after(&mut h, r);
            formed = r + 1;
            continue;
        }
        if formed + 1 == t {
            break;
        }
        form_tier(&mut h, formed);
        formed += 1;
    }
    Ok(EpOutcome::Formed(Box::new(h)))
}

/// Computes edges from tier `j` and substructure-vertices of tier `j + 1`.
fn form_tier(h: &mut Hyperstructure, j: usize) {
    h.edge_subs[j].clear();
    let edges: Vec<_> = h.skeleton.edges(j).collect();
    for (u, w) in edges {
        let p = shift(h, j, u, w);
        if p.is_empty() {
            h.skeleton.remove_edge(j, u, w);
        } else {
            h.edge_subs[j].insert((u.code(), w.code()), p);
        }
    }
    rebuild_vertices(h, j + 1);
}

/// Rebuilds the substructure-vertices of tier `j` from the stored edges into it.
fn rebuild_vertices(h: &mut Hyperstructure, j: usize) {
    let mut subs: [Option<Cts>; 8] = Default::default();
    for (&(u, w), p) in &h.edge_subs[j - 1] {
        if !h.skeleton.has_edge(j - 1, TripletLine::new(u), TripletLine::new(w)) {
            continue;
        }
        let slot = &mut subs[w as usize];
        *slot = Some(match slot.take() {
            None => p.clone(),
            Some(acc) => acc.union(p).expect("substructures share a permutation"),
        });
    }
    for w in h.skeleton.vertices(j).lines() {
        if subs[w.code() as usize].is_none() {
            h.skeleton.remove_vertex(j, w);
        }
    }
    h.vertex_subs[j] = subs;
}

/// Discards everything formed after tier `r + 1` and rebuilds tier `r + 1`
/// from the surviving edges.
fn resume_after(h: &mut Hyperstructure, r: usize) {
    for j in r + 2..h.num_tiers() {
        h.vertex_subs[j] = Default::default();
    }
    for m in h.edge_subs.iter_mut().skip(r + 1) {
        m.clear();
    }
    h.edge_subs[r].retain(|&(u, w), _| h.skeleton.has_edge(r, TripletLine::new(u), TripletLine::new(w)));
    rebuild_vertices(h, r + 1);
}

/// Limits for route extraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtractConfig {
    pub limit: usize,
    pub backtrack_budget: u64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            limit: 1,
            backtrack_budget: 1_000_000,
        }
    }
}

/// Routes found by a backward walk, with telemetry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub routes: Vec<Vec<TripletLine>>,
    pub assignments: Vec<Assignment>,
    pub backtracks: u64,
    pub budget_exhausted: bool,
}

/// Walks from the last tier back to tier 0 along skeleton edges. `start`
/// seeds the running state at a last-tier vertex and `step` extends it by a
/// vertex one tier down; `None` means the running intersection emptied and
/// counts as a backtrack.
pub(crate) fn walk_routes<S>(
    skeleton: &BasicGraph,
    cfg: ExtractConfig,
    start: impl Fn(TripletLine) -> Option<S>,
    step: impl Fn(&S, usize, TripletLine) -> Option<S>,
) -> (Vec<Vec<TripletLine>>, u64, bool) {
    struct Walk<'a, S, F> {
        skeleton: &'a BasicGraph,
        cfg: ExtractConfig,
        step: F,
        routes: Vec<Vec<TripletLine>>,
        path: Vec<TripletLine>,
        backtracks: u64,
        exhausted: bool,
        _s: std::marker::PhantomData<S>,
    }
    impl<S, F: Fn(&S, usize, TripletLine) -> Option<S>> Walk<'_, S, F> {
        fn done(&self) -> bool {
            self.exhausted || self.routes.len() >= self.cfg.limit
        }
        fn go(&mut self, j: usize, state: &S) {
            if j == 0 {
                let mut route = self.path.clone();
                route.reverse();
                self.routes.push(route);
                return;
            }
            let w = *self.path.last().expect("path is seeded");
            for u in self.skeleton.predecessors(j, w).lines() {
                if self.done() {
                    return;
                }
                match (self.step)(state, j - 1, u) {
                    Some(next) => {
                        self.path.push(u);
                        self.go(j - 1, &next);
                        self.path.pop();
                    }
                    None => {
                        self.backtracks += 1;
                        if self.backtracks >= self.cfg.backtrack_budget {
                            self.exhausted = true;
                        }
                    }
                }
            }
        }
    }
    let last = skeleton.num_tiers() - 1;
    let mut walk = Walk {
        skeleton,
        cfg,
        step,
        routes: Vec::new(),
        path: Vec::new(),
        backtracks: 0,
        exhausted: false,
        _s: std::marker::PhantomData,
    };
    for w in skeleton.vertices(last).lines() {
        if walk.done() {
            break;
        }
        let Some(s) = start(w) else {
            walk.backtracks += 1;
            continue;
        };
        walk.path.push(w);
        walk.go(last, &s);
        walk.path.pop();
    }
    (walk.routes, walk.backtracks, walk.exhausted)
}

/// Up to `cfg.limit` joint satisfying sets of the two structures.
pub fn extract_jss(h: &Hyperstructure, cfg: ExtractConfig) -> Result<Extraction, HyperError> {
    let last = h.num_tiers() - 1;
    let (routes, backtracks, budget_exhausted) = walk_routes(
        &h.skeleton,
        cfg,
        |w| h.vertex_sub(last, w).cloned(),
        |acc: &Cts, j, u| {
            let next = acc.intersect(h.vertex_sub(j, u)?).ok()?;
            (!next.is_empty()).then_some(next)
        },
    );
    if routes.is_empty() && cfg.limit > 0 {
        return Err(HyperError::ExtractionFailed { backtracks });
    }
    let assignments: Vec<Assignment> = routes.iter().map(|r| h.skeleton.route_assignment(r)).collect();
    for a in &assignments {
        assert!(
            h.first.contains_assignment(a)? && h.second.contains_assignment(a)?,
            "extracted route {a} is not a joint satisfying set"
        );
    }
    Ok(Extraction {
        routes,
        assignments,
        backtracks,
        budget_exhausted,
    })
}
