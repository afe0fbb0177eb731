//! Compact-triplet structures.
//!
//! A [`Cts`] over `n` variables has `n - 2` tiers. Tier `j` (0-based here)
//! constrains the variables at permutation positions `j, j+1, j+2` and holds
//! a subset of the eight value triplets, stored as an 8-bit mask. A triplet
//! code is `4*b1 + 2*b2 + b3` where `b1` is the value of the tier's first
//! variable. Chains of compatible triplets across all tiers spell out the
//! assignments the structure encodes.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{Assignment, VarId};

/// Default guard for [`Cts::enumerate_assignments`].
pub const DEFAULT_ENUMERATION_BOUND: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CtsError {
    #[error("operands are built over different permutations")]
    PermutationMismatch,
    #[error("enumeration refused: n = {n} exceeds the bound {bound}")]
    BoundExceeded { n: usize, bound: usize },
    #[error("assignment has length {got}, structure has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("not a permutation of 1..={0}")]
    NotAPermutation(usize),
    #[error("a structure needs at least 3 variables")]
    TooFewVariables,
    #[error("expected {expected} tiers, got {got}")]
    TierCount { expected: usize, got: usize },
    #[error("malformed structure dump: {0}")]
    Dump(String),
}

/// Ordering of variables underlying a structure, with inverse lookup.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<VarId>,
    position: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<VarId>) -> Result<Permutation, CtsError> {
        let n = order.len();
        if n < 3 {
            return Err(CtsError::TooFewVariables);
        }
        let mut position = vec![usize::MAX; n];
        for (p, v) in order.iter().enumerate() {
            let off = v.offset();
            if off >= n || position[off] != usize::MAX {
                return Err(CtsError::NotAPermutation(n));
            }
            position[off] = p;
        }
        Ok(Permutation { order, position })
    }

    pub fn from_indices(indices: &[u32]) -> Result<Permutation, CtsError> {
        if indices.contains(&0) {
            return Err(CtsError::NotAPermutation(indices.len()));
        }
        Permutation::new(indices.iter().map(|&i| VarId::new(i)).collect())
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation::new((0..n).map(VarId::from_offset).collect()).expect("identity is bijective")
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[VarId] {
        &self.order
    }

    /// Variable at the 0-based position `p`.
    pub fn var_at(&self, p: usize) -> VarId {
        self.order[p]
    }

    /// 0-based position of `var`.
    pub fn position(&self, var: VarId) -> usize {
        self.position[var.offset()]
    }

    pub fn num_tiers(&self) -> usize {
        self.order.len() - 2
    }

    /// The three variables constrained by `tier`.
    pub fn window(&self, tier: usize) -> [VarId; 3] {
        [self.order[tier], self.order[tier + 1], self.order[tier + 2]]
    }

    /// Tiers whose window contains `var`.
    pub fn tiers_containing(&self, var: VarId) -> std::ops::RangeInclusive<usize> {
        let p = self.position(var);
        p.saturating_sub(2)..=p.min(self.num_tiers() - 1)
    }
}

/// A value triplet, `4*b1 + 2*b2 + b3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripletLine(u8);

impl TripletLine {
    pub fn new(code: u8) -> TripletLine {
        assert!(code < 8, "triplet codes are 0..8");
        TripletLine(code)
    }

    pub fn from_bits(b1: bool, b2: bool, b3: bool) -> TripletLine {
        TripletLine(u8::from(b1) << 2 | u8::from(b2) << 1 | u8::from(b3))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Value at offset `k` (0 = the tier's first variable).
    pub fn bit(self, k: usize) -> bool {
        self.0 >> (2 - k) & 1 == 1
    }

    /// Whether `next`, one tier below, can be adjoined.
    pub fn compatible(self, next: TripletLine) -> bool {
        self.0 & 3 == next.0 >> 1
    }
}

impl fmt::Display for TripletLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03b}", self.0)
    }
}

/// Free-standing form of [`TripletLine::compatible`].
pub fn compatible(t: TripletLine, u: TripletLine) -> bool {
    t.compatible(u)
}

/// Membership mask over the eight triplets of one tier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tier(u8);

impl Tier {
    pub const EMPTY: Tier = Tier(0);
    pub const FULL: Tier = Tier(0xff);

    pub fn from_mask(mask: u8) -> Tier {
        Tier(mask)
    }

    pub fn from_codes(codes: &[u8]) -> Tier {
        Tier(codes.iter().fold(0, |m, &c| m | 1 << c))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, line: TripletLine) -> bool {
        self.0 >> line.0 & 1 == 1
    }

    pub fn insert(&mut self, line: TripletLine) {
        self.0 |= 1 << line.0;
    }

    pub fn remove(&mut self, line: TripletLine) {
        self.0 &= !(1 << line.0);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn lines(self) -> impl Iterator<Item = TripletLine> {
        (0..8u8).filter(move |c| self.0 >> c & 1 == 1).map(TripletLine)
    }

    /// Lines whose value at offset `k` equals `value`.
    pub fn with_bit(self, k: usize, value: bool) -> Tier {
        Tier(self.0 & bit_mask(k, value))
    }

    /// 4-bit set of the `(b2, b3)` suffixes present.
    pub(crate) fn suffixes(self) -> u8 {
        self.lines().fold(0, |s, l| s | 1 << (l.0 & 3))
    }

    /// 4-bit set of the `(b1, b2)` prefixes present.
    pub(crate) fn prefixes(self) -> u8 {
        self.lines().fold(0, |s, l| s | 1 << (l.0 >> 1))
    }
}

/// Mask of triplet codes whose bit at offset `k` equals `value`.
pub(crate) fn bit_mask(k: usize, value: bool) -> u8 {
    (0..8u8)
        .filter(|c| (c >> (2 - k) & 1 == 1) == value)
        .fold(0, |m, c| m | 1 << c)
}

/// Codes whose prefix lies in the 4-bit set `pairs`.
fn with_prefix_in(pairs: u8) -> u8 {
    (0..8u8)
        .filter(|c| pairs >> (c >> 1) & 1 == 1)
        .fold(0, |m, c| m | 1 << c)
}

/// Codes whose suffix lies in the 4-bit set `pairs`.
fn with_suffix_in(pairs: u8) -> u8 {
    (0..8u8)
        .filter(|c| pairs >> (c & 3) & 1 == 1)
        .fold(0, |m, c| m | 1 << c)
}

/// Arc-consistency fixpoint over a chain of tiers. Returns the index of the
/// first tier that ran empty, leaving the tiers in an unspecified state.
pub(crate) fn clear_tiers(tiers: &mut [Tier]) -> Option<usize> {
    let t = tiers.len();
    if let Some(j) = tiers.iter().position(|x| x.is_empty()) {
        return Some(j);
    }
    let mut queued = vec![true; t];
    let mut queue: std::collections::VecDeque<usize> = (0..t).collect();
    while let Some(j) = queue.pop_front() {
        queued[j] = false;
        for i in [j.wrapping_sub(1), j + 1] {
            if i >= t {
                continue;
            }
            let mut keep = tiers[i].0;
            if i > 0 {
                keep &= with_prefix_in(tiers[i - 1].suffixes());
            }
            if i + 1 < t {
                keep &= with_suffix_in(tiers[i + 1].prefixes());
            }
            if keep != tiers[i].0 {
                tiers[i].0 = keep;
                if keep == 0 {
                    return Some(i);
                }
                if !queued[i] {
                    queued[i] = true;
                    queue.push_back(i);
                }
            }
        }
    }
    None
}

/// A compact-triplet structure.
///
/// Structures produced by the operations of this module are cleared: every
/// line has a compatible neighbour in each adjacent tier. The empty structure
/// is a distinct state with all tiers zeroed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cts {
    perm: Arc<Permutation>,
    tiers: Vec<Tier>,
    empty: bool,
}

impl Cts {
    /// Every tier holds all eight triplets.
    pub fn complete(perm: Arc<Permutation>) -> Cts {
        let t = perm.num_tiers();
        Cts {
            perm,
            tiers: vec![Tier::FULL; t],
            empty: false,
        }
    }

    pub fn empty(perm: Arc<Permutation>) -> Cts {
        let t = perm.num_tiers();
        Cts {
            perm,
            tiers: vec![Tier::EMPTY; t],
            empty: true,
        }
    }

    /// Wraps raw tiers without clearing them. Use [`Cts::clear`] afterwards
    /// unless the tiers are known to be cleared.
    pub fn from_raw_tiers(perm: Arc<Permutation>, tiers: Vec<Tier>) -> Result<Cts, CtsError> {
        if tiers.len() != perm.num_tiers() {
            return Err(CtsError::TierCount {
                expected: perm.num_tiers(),
                got: tiers.len(),
            });
        }
        if tiers.iter().any(|t| t.is_empty()) {
            return Ok(Cts::empty(perm));
        }
        Ok(Cts {
            perm,
            tiers,
            empty: false,
        })
    }

    /// Builds from tiers and clears.
    pub fn from_tiers(perm: Arc<Permutation>, tiers: Vec<Tier>) -> Result<Cts, CtsError> {
        Ok(Cts::from_raw_tiers(perm, tiers)?.clear())
    }

    /// The elementary structure of one assignment.
    pub fn from_assignment(a: &Assignment, perm: Arc<Permutation>) -> Result<Cts, CtsError> {
        if a.len() != perm.len() {
            return Err(CtsError::LengthMismatch {
                expected: perm.len(),
                got: a.len(),
            });
        }
        let tiers = (0..perm.num_tiers())
            .map(|j| {
                let [x, y, z] = perm.window(j);
                let mut t = Tier::EMPTY;
                t.insert(TripletLine::from_bits(a.get(x), a.get(y), a.get(z)));
                t
            })
            .collect();
        Ok(Cts {
            perm,
            tiers,
            empty: false,
        })
    }

    pub fn perm(&self) -> &Arc<Permutation> {
        &self.perm
    }

    pub fn num_vars(&self) -> usize {
        self.perm.len()
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn tier(&self, j: usize) -> Tier {
        self.tiers[j]
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn line_count(&self) -> usize {
        self.tiers.iter().map(|t| t.len()).sum()
    }

    /// One line per tier.
    pub fn is_elementary(&self) -> bool {
        !self.empty && self.tiers.iter().all(|t| t.len() == 1)
    }

    fn same_perm(&self, other: &Cts) -> Result<(), CtsError> {
        if Arc::ptr_eq(&self.perm, &other.perm) || *self.perm == *other.perm {
            Ok(())
        } else {
            Err(CtsError::PermutationMismatch)
        }
    }

    /// Removes non-compatible lines to a fixpoint.
    pub fn clear(&self) -> Cts {
        self.clone().into_cleared().0
    }

    /// Clears in place, also reporting the first tier that ran empty.
    pub fn into_cleared(mut self) -> (Cts, Option<usize>) {
        if self.empty {
            return (self, None);
        }
        match clear_tiers(&mut self.tiers) {
            None => (self, None),
            Some(j) => (Cts::empty(self.perm), Some(j)),
        }
    }

    /// Tier-wise union; no clearing is applied.
    pub fn union(&self, other: &Cts) -> Result<Cts, CtsError> {
        self.same_perm(other)?;
        if self.empty {
            return Ok(other.clone());
        }
        if other.empty {
            return Ok(self.clone());
        }
        let tiers = self
            .tiers
            .iter()
            .zip(&other.tiers)
            .map(|(a, b)| Tier(a.0 | b.0))
            .collect();
        Ok(Cts {
            perm: self.perm.clone(),
            tiers,
            empty: false,
        })
    }

    /// Tier-wise intersection followed by clearing.
    pub fn intersect(&self, other: &Cts) -> Result<Cts, CtsError> {
        self.same_perm(other)?;
        if self.empty || other.empty {
            return Ok(Cts::empty(self.perm.clone()));
        }
        let tiers = self
            .tiers
            .iter()
            .zip(&other.tiers)
            .map(|(a, b)| Tier(a.0 & b.0))
            .collect();
        Ok(Cts::from_raw_tiers(self.perm.clone(), tiers)?.clear())
    }

    /// Fixes `var` to `value`, dropping contradicting lines, then clears.
    pub fn concretize(&self, var: VarId, value: bool) -> Cts {
        if self.empty {
            return self.clone();
        }
        let mut out = self.clone();
        if out.restrict_var(var, value) {
            out.into_cleared().0
        } else {
            out
        }
    }

    /// n-ary concretization: repeated unary application.
    pub fn concretize_many(&self, fixes: &[(VarId, bool)]) -> Cts {
        let mut out = self.clone();
        for &(v, b) in fixes {
            if out.empty {
                break;
            }
            out = out.concretize(v, b);
        }
        out
    }

    /// Drops lines with the wrong value of `var` without clearing. Returns
    /// whether anything changed.
    pub(crate) fn restrict_var(&mut self, var: VarId, value: bool) -> bool {
        let p = self.perm.position(var);
        let mut changed = false;
        for j in self.perm.tiers_containing(var) {
            let before = self.tiers[j];
            self.tiers[j] = before.with_bit(p - j, value);
            changed |= before != self.tiers[j];
        }
        changed
    }

    pub(crate) fn tiers_mut(&mut self) -> &mut [Tier] {
        &mut self.tiers
    }

    pub(crate) fn mark_empty(&mut self) {
        self.empty = true;
        self.tiers.iter_mut().for_each(|t| *t = Tier::EMPTY);
    }

    /// Tier-wise set equality.
    pub fn equivalent(&self, other: &Cts) -> Result<bool, CtsError> {
        self.same_perm(other)?;
        Ok(self.empty == other.empty && self.tiers == other.tiers)
    }

    /// Whether every tier contains the line induced by `a`. Linear in `n`.
    pub fn contains_assignment(&self, a: &Assignment) -> Result<bool, CtsError> {
        if a.len() != self.num_vars() {
            return Err(CtsError::LengthMismatch {
                expected: self.num_vars(),
                got: a.len(),
            });
        }
        if self.empty {
            return Ok(false);
        }
        Ok((0..self.num_tiers()).all(|j| {
            let [x, y, z] = self.perm.window(j);
            self.tiers[j].contains(TripletLine::from_bits(a.get(x), a.get(y), a.get(z)))
        }))
    }

    /// All encoded assignments, in natural variable order.
    pub fn enumerate_assignments(&self) -> Result<BTreeSet<Assignment>, CtsError> {
        self.enumerate_assignments_bounded(DEFAULT_ENUMERATION_BOUND)
    }

    pub fn enumerate_assignments_bounded(
        &self,
        bound: usize,
    ) -> Result<BTreeSet<Assignment>, CtsError> {
        let n = self.num_vars();
        if n > bound {
            return Err(CtsError::BoundExceeded { n, bound });
        }
        let mut out = BTreeSet::new();
        if self.empty {
            return Ok(out);
        }
        let mut chain = Vec::with_capacity(self.num_tiers());
        self.walk_chains(&mut chain, &mut |lines| {
            out.insert(self.chain_to_assignment(lines));
        });
        Ok(out)
    }

    fn walk_chains(&self, chain: &mut Vec<TripletLine>, emit: &mut dyn FnMut(&[TripletLine])) {
        let j = chain.len();
        if j == self.num_tiers() {
            emit(chain);
            return;
        }
        for line in self.tiers[j].lines() {
            if chain.last().is_none_or(|prev| prev.compatible(line)) {
                chain.push(line);
                self.walk_chains(chain, emit);
                chain.pop();
            }
        }
    }

    /// Maps one line per tier (a compatible chain) back to an assignment.
    pub fn chain_to_assignment(&self, lines: &[TripletLine]) -> Assignment {
        let mut a = Assignment::zeros(self.num_vars());
        for (j, line) in lines.iter().enumerate() {
            for (k, v) in self.perm.window(j).into_iter().enumerate() {
                a.set(v, line.bit(k));
            }
        }
        a
    }

    /// Some encoded assignment, found by following compatible lines greedily.
    /// Cleared structures never dead-end, so no search is needed.
    pub fn any_assignment(&self) -> Option<Assignment> {
        if self.empty {
            return None;
        }
        let mut chain: Vec<TripletLine> = Vec::with_capacity(self.num_tiers());
        for j in 0..self.num_tiers() {
            let next = self.tiers[j]
                .lines()
                .find(|&l| chain.last().is_none_or(|p| p.compatible(l)))?;
            chain.push(next);
        }
        Some(self.chain_to_assignment(&chain))
    }

    /// The single assignment of an elementary structure.
    pub fn elementary_assignment(&self) -> Option<Assignment> {
        if !self.is_elementary() {
            return None;
        }
        self.any_assignment()
    }

    /// Renders in the tabular layout used by trace dumps.
    pub fn render(&self, names: &[String]) -> String {
        render_tiers(&self.perm, &self.tiers, names, self.empty)
    }
}

/// Letters for up to 26 variables, `x1..xn` beyond.
pub fn default_names(n: usize) -> Vec<String> {
    if n <= 26 {
        (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
    } else {
        indexed_names(n)
    }
}

pub fn indexed_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Header of variable names in permutation order, then one row per line,
/// tiers top to bottom, codes ascending, blanks outside the tier window.
pub fn render_tiers(perm: &Permutation, tiers: &[Tier], names: &[String], empty: bool) -> String {
    let width = perm
        .order()
        .iter()
        .map(|v| names[v.offset()].len())
        .max()
        .unwrap_or(1);
    let mut out = String::new();
    let header: Vec<String> = perm
        .order()
        .iter()
        .map(|v| format!("{:>width$}", names[v.offset()]))
        .collect();
    out.push_str(header.join(" ").trim_end());
    out.push('\n');
    if empty {
        out.push_str("(empty)\n");
        return out;
    }
    for (j, tier) in tiers.iter().enumerate() {
        for line in tier.lines() {
            let mut cells = vec![" ".repeat(width); perm.len()];
            for (k, cell) in cells[j..j + 3].iter_mut().enumerate() {
                *cell = format!("{:>width$}", u8::from(line.bit(k)));
            }
            out.push_str(cells.join(" ").trim_end());
            out.push('\n');
        }
    }
    out
}

/// Parses the layout written by [`render_tiers`] back into a permutation and
/// tiers. Rows may come in any order. Names are resolved against `names`.
pub fn parse_rendered(text: &str, names: &[String]) -> Result<(Permutation, Vec<Tier>, bool), CtsError> {
    let mut rows = text.lines().filter(|l| !l.trim().is_empty());
    let header = rows.next().ok_or_else(|| CtsError::Dump("missing header".into()))?;
    let order = header
        .split_whitespace()
        .map(|name| {
            names
                .iter()
                .position(|n| n == name)
                .map(VarId::from_offset)
                .ok_or_else(|| CtsError::Dump(format!("unknown variable `{name}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let perm = Permutation::new(order)?;
    let width = perm
        .order()
        .iter()
        .map(|v| names[v.offset()].len())
        .max()
        .unwrap_or(1);
    let mut tiers = vec![Tier::EMPTY; perm.num_tiers()];
    let mut empty = false;
    for row in rows {
        if row.trim() == "(empty)" {
            empty = true;
            continue;
        }
        let mut filled = Vec::new();
        for col in 0..perm.len() {
            let start = col * (width + 1);
            let cell = row.get(start..(start + width).min(row.len())).unwrap_or("").trim();
            match cell {
                "" => {}
                "0" => filled.push((col, false)),
                "1" => filled.push((col, true)),
                other => return Err(CtsError::Dump(format!("bad cell `{other}`"))),
            }
        }
        if filled.len() != 3 || filled[2].0 != filled[0].0 + 2 || filled[1].0 != filled[0].0 + 1 {
            return Err(CtsError::Dump(format!("row `{row}` is not a compact triplet")));
        }
        if filled[0].0 >= tiers.len() {
            return Err(CtsError::Dump(format!("row `{row}` is outside the tiers")));
        }
        tiers[filled[0].0].insert(TripletLine::from_bits(filled[0].1, filled[1].1, filled[2].1));
    }
    Ok((perm, tiers, empty))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm5() -> Arc<Permutation> {
        Arc::new(Permutation::identity(5))
    }

    fn cts(codes: &[&[u8]]) -> Cts {
        let tiers = codes.iter().map(|c| Tier::from_codes(c)).collect();
        Cts::from_raw_tiers(perm5(), tiers).unwrap()
    }

    fn a(s: &str) -> Assignment {
        Assignment::from_bits_str(s).unwrap()
    }

    #[test]
    fn compatibility() {
        let t = TripletLine::new;
        assert!(compatible(t(0b011), t(0b110)));
        assert!(compatible(t(0), t(0)));
        assert!(!compatible(t(0b011), t(0)));
    }

    #[test]
    fn clearing_z_star() {
        let z_star = cts(&[
            &[0b010, 0b011, 0b100, 0b110],
            &[0b001, 0b010, 0b011, 0b110],
            &[0b000, 0b001, 0b011, 0b101, 0b110],
        ]);
        let z = z_star.clear();
        assert_eq!(z, cts(&[&[0b011, 0b100], &[0b001, 0b110], &[0b011, 0b101]]));
        assert_eq!(z.clear(), z);
        assert!(!z.equivalent(&z_star).unwrap());
    }

    #[test]
    fn middle_tier_without_support_empties() {
        let s = cts(&[&[0b111], &[0b000], &[0b111]]).clear();
        assert!(s.is_empty());
    }

    #[test]
    fn n3_single_tier() {
        let p = Arc::new(Permutation::identity(3));
        let s = Cts::from_tiers(p.clone(), vec![Tier::from_codes(&[5])]).unwrap();
        assert_eq!(s.enumerate_assignments().unwrap().len(), 1);
        assert!(s.concretize(VarId::new(2), true).is_empty());
        assert_eq!(Cts::complete(p).enumerate_assignments().unwrap().len(), 8);
    }

    #[test]
    fn algebra_examples() {
        let s1 = cts(&[&[0b010, 0b011], &[0b101, 0b110], &[0b011, 0b100, 0b101]]);
        let s2 = cts(&[&[0b011, 0b100], &[0b110, 0b001], &[0b101, 0b011]]);
        let s3 = s1.union(&s2).unwrap();
        assert_eq!(
            s3,
            cts(&[
                &[0b010, 0b011, 0b100],
                &[0b101, 0b110, 0b001],
                &[0b011, 0b100, 0b101]
            ])
        );
        let s4 = s1.intersect(&s2).unwrap();
        assert_eq!(s4, cts(&[&[0b011], &[0b110], &[0b101]]));
        let c = s3.concretize(VarId::new(3), true);
        assert_eq!(c, cts(&[&[0b011], &[0b110], &[0b100, 0b101]]));
        assert!(s4.concretize(VarId::new(5), false).is_empty());
        assert_eq!(c.concretize(VarId::new(3), true), c);
    }

    #[test]
    fn identities() {
        let s = cts(&[&[0b011, 0b100], &[0b001, 0b110], &[0b011, 0b101]]);
        let e = Cts::empty(perm5());
        assert_eq!(s.union(&e).unwrap(), s);
        assert_eq!(s.union(&s).unwrap(), s);
        assert_eq!(s.intersect(&s).unwrap(), s);
        assert!(s.intersect(&e).unwrap().is_empty());
        let other = Arc::new(Permutation::from_indices(&[2, 1, 3, 4, 5]).unwrap());
        assert_eq!(
            s.union(&Cts::complete(other)).unwrap_err(),
            CtsError::PermutationMismatch
        );
    }

    #[test]
    fn assignments_round_trip() {
        let z = cts(&[&[0b011, 0b100], &[0b001, 0b110], &[0b011, 0b101]]);
        let got: Vec<String> = z
            .enumerate_assignments()
            .unwrap()
            .iter()
            .map(|x| x.to_string())
            .collect();
        assert_eq!(got, ["01101", "10011"]);
        assert!(z.contains_assignment(&a("01101")).unwrap());
        assert!(!z.contains_assignment(&a("00000")).unwrap());

        let e = Cts::from_assignment(&a("01101"), perm5()).unwrap();
        assert_eq!(e, cts(&[&[0b011], &[0b110], &[0b101]]));
        let zero = Cts::from_assignment(&a("00000"), perm5()).unwrap();
        assert!(zero.tiers().iter().all(|t| *t == Tier::from_codes(&[0])));
        assert_eq!(Cts::complete(perm5()).enumerate_assignments().unwrap().len(), 32);
        assert!(Cts::empty(perm5()).enumerate_assignments().unwrap().is_empty());
    }

    #[test]
    fn enumeration_guard() {
        let p = Arc::new(Permutation::identity(30));
        assert!(matches!(
            Cts::complete(p).enumerate_assignments(),
            Err(CtsError::BoundExceeded { n: 30, bound: 24 })
        ));
    }

    #[test]
    fn permutation_checks() {
        assert!(Permutation::from_indices(&[1, 2, 2]).is_err());
        assert!(Permutation::from_indices(&[1, 2]).is_err());
        let p = Permutation::from_indices(&[8, 7, 2, 5, 1, 6, 3, 4]).unwrap();
        assert_eq!(p.position(VarId::new(1)), 4);
        assert_eq!(p.tiers_containing(VarId::new(8)), 0..=0);
        assert_eq!(p.tiers_containing(VarId::new(1)), 2..=4);
        assert_eq!(p.tiers_containing(VarId::new(4)), 5..=5);
    }

    #[test]
    fn render_parse_round_trip() {
        let z = cts(&[&[0b011, 0b100], &[0b001, 0b110], &[0b011, 0b101]]);
        let names = indexed_names(5);
        let text = z.render(&names);
        assert!(text.starts_with("x1 x2 x3 x4 x5\n 0  1  1\n"));
        let (p, tiers, empty) = parse_rendered(&text, &names).unwrap();
        assert!(!empty);
        assert_eq!(Cts::from_raw_tiers(Arc::new(p), tiers).unwrap(), z);
    }
}
