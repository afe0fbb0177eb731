//! Joint transformation of discordant structures.
//!
//! Three rules run to a fixpoint: a variable that is constant in any
//! structure is fixed in all of them, the value combinations of every
//! co-tiered variable pair are intersected across all structures that
//! contain the pair, and every removal is followed by clearing.

use serde::{Deserialize, Serialize};

use crate::cts::{Cts, Tier};
use crate::formula::VarId;

/// Value of a variable forced by a structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constant {
    Zero,
    One,
    Free,
}

/// Bitmask of the values `var` takes across all tiers containing it:
/// bit 0 for value 0, bit 1 for value 1.
fn value_set(s: &Cts, var: VarId) -> u8 {
    let p = s.perm().position(var);
    let mut seen = 0u8;
    for j in s.perm().tiers_containing(var) {
        let t = s.tier(j);
        if !t.with_bit(p - j, false).is_empty() {
            seen |= 1;
        }
        if !t.with_bit(p - j, true).is_empty() {
            seen |= 2;
        }
    }
    seen
}

/// Zero/One iff every line of every tier containing `var` carries that value.
pub fn constant_of(s: &Cts, var: VarId) -> Constant {
    match value_set(s, var) {
        1 => Constant::Zero,
        2 => Constant::One,
        _ => Constant::Free,
    }
}

/// Allowed value combinations of an ordered variable pair. Bit `2*va + vb`
/// is set when `(va, vb)` is allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRelation {
    pub vars: (VarId, VarId),
    pub allowed: u8,
}

impl PairRelation {
    pub fn allows(&self, a: bool, b: bool) -> bool {
        self.allowed >> (usize::from(a) << 1 | usize::from(b)) & 1 == 1
    }
}

/// Projection of tier `t` onto offsets `(ka, kb)` as a 4-bit set.
fn project(t: Tier, ka: usize, kb: usize) -> u8 {
    t.lines()
        .fold(0, |s, l| s | 1 << (usize::from(l.bit(ka)) << 1 | usize::from(l.bit(kb))))
}

/// `None` when the two variables never share a tier.
pub fn pair_relation(s: &Cts, a: VarId, b: VarId) -> Option<PairRelation> {
    let (pa, pb) = (s.perm().position(a), s.perm().position(b));
    if pa == pb || pa.abs_diff(pb) > 2 {
        return None;
    }
    let (lo, hi) = (pa.min(pb), pa.max(pb));
    let mut allowed = 0b1111;
    for j in hi.saturating_sub(2)..=lo.min(s.num_tiers() - 1) {
        allowed &= project(s.tier(j), pa - j, pb - j);
    }
    Some(PairRelation {
        vars: (a, b),
        allowed,
    })
}

/// Structures over the same variables, each with its own permutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureSystem {
    pub structures: Vec<Cts>,
}

impl StructureSystem {
    pub fn new(structures: Vec<Cts>) -> StructureSystem {
        StructureSystem { structures }
    }
}

/// Why a system unified to the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmptyCause {
    /// A structure was empty on input.
    InputEmpty { structure: usize },
    /// A tier of one structure ran empty.
    EmptyTier { structure: usize, tier: usize },
    /// A variable is fixed to 0 in one structure and 1 in another.
    ConstantConflict { var: VarId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnifyOutcome {
    Unified { system: StructureSystem, waves: usize },
    Empty { cause: EmptyCause, waves: usize },
}

impl UnifyOutcome {
    pub fn system(&self) -> Option<&StructureSystem> {
        match self {
            UnifyOutcome::Unified { system, .. } => Some(system),
            UnifyOutcome::Empty { .. } => None,
        }
    }

    pub fn into_system(self) -> Option<StructureSystem> {
        match self {
            UnifyOutcome::Unified { system, .. } => Some(system),
            UnifyOutcome::Empty { .. } => None,
        }
    }

    pub fn waves(&self) -> usize {
        match self {
            UnifyOutcome::Unified { waves, .. } | UnifyOutcome::Empty { waves, .. } => *waves,
        }
    }
}

const PAIR_OFFSETS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Runs the three unification rules to a fixpoint.
pub fn unify(sys: StructureSystem) -> UnifyOutcome {
    let mut structures = sys.structures;
    if let Some(i) = structures.iter().position(|s| s.is_empty()) {
        return UnifyOutcome::Empty {
            cause: EmptyCause::InputEmpty { structure: i },
            waves: 0,
        };
    }
    let Some(n) = structures.first().map(|s| s.num_vars()) else {
        return UnifyOutcome::Unified {
            system: StructureSystem::new(structures),
            waves: 0,
        };
    };
    let mut waves = 0;
    let mut allowed = vec![0u8; n * n];
    let mut dirty = vec![false; structures.len()];
    loop {
        waves += 1;
        let mut changed = false;

        // Rule 1: constants propagate to every structure.
        let mut fixed: Vec<u8> = vec![0b11; n];
        for s in &structures {
            for (off, f) in fixed.iter_mut().enumerate() {
                let seen = value_set(s, VarId::from_offset(off));
                if seen != 0b11 {
                    *f &= seen;
                }
            }
        }
        if let Some(off) = fixed.iter().position(|&f| f == 0) {
            return UnifyOutcome::Empty {
                cause: EmptyCause::ConstantConflict {
                    var: VarId::from_offset(off),
                },
                waves,
            };
        }
        for (s, d) in structures.iter_mut().zip(dirty.iter_mut()) {
            for (off, &f) in fixed.iter().enumerate() {
                if f != 0b11 {
                    *d |= s.restrict_var(VarId::from_offset(off), f == 0b10);
                }
            }
        }
        if let Some(cause) = clear_dirty(&mut structures, &mut dirty, &mut changed) {
            return UnifyOutcome::Empty { cause, waves };
        }

        // Rule 2: agreement of pair value combinations.
        allowed.iter_mut().for_each(|a| *a = 0b1111);
        for s in &structures {
            let perm = s.perm();
            for j in 0..s.num_tiers() {
                let window = perm.window(j);
                for (ka, kb) in PAIR_OFFSETS {
                    let (va, vb) = (window[ka], window[kb]);
                    let (lo, hi, pa, pb) = if va < vb { (va, vb, ka, kb) } else { (vb, va, kb, ka) };
                    allowed[lo.offset() * n + hi.offset()] &= project(s.tier(j), pa, pb);
                }
            }
        }
        for (s, d) in structures.iter_mut().zip(dirty.iter_mut()) {
            let perm = s.perm().clone();
            for j in 0..s.num_tiers() {
                let window = perm.window(j);
                let mut keep = s.tier(j).mask();
                for (ka, kb) in PAIR_OFFSETS {
                    let (va, vb) = (window[ka], window[kb]);
                    let (lo, hi, pa, pb) = if va < vb { (va, vb, ka, kb) } else { (vb, va, kb, ka) };
                    let rel = allowed[lo.offset() * n + hi.offset()];
                    if rel == 0b1111 {
                        continue;
                    }
                    for l in s.tier(j).lines() {
                        let combo = usize::from(l.bit(pa)) << 1 | usize::from(l.bit(pb));
                        if rel >> combo & 1 == 0 {
                            keep &= !(1 << l.code());
                        }
                    }
                }
                if keep != s.tier(j).mask() {
                    s.tiers_mut()[j] = Tier::from_mask(keep);
                    *d = true;
                }
            }
        }
        if let Some(cause) = clear_dirty(&mut structures, &mut dirty, &mut changed) {
            return UnifyOutcome::Empty { cause, waves };
        }
        if !changed {
            break;
        }
    }
    UnifyOutcome::Unified {
        system: StructureSystem::new(structures),
        waves,
    }
}

fn clear_dirty(structures: &mut [Cts], dirty: &mut [bool], changed: &mut bool) -> Option<EmptyCause> {
    for (i, (s, d)) in structures.iter_mut().zip(dirty.iter_mut()).enumerate() {
        if !std::mem::take(d) {
            continue;
        }
        *changed = true;
        if let Some(tier) = crate::cts::clear_tiers(s.tiers_mut()) {
            s.mark_empty();
            return Some(EmptyCause::EmptyTier { structure: i, tier });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cts::Permutation;
    use crate::formula::Assignment;
    use std::sync::Arc;

    fn z() -> Cts {
        let p = Arc::new(Permutation::identity(5));
        let t = [&[0b011u8, 0b100][..], &[0b001, 0b110], &[0b011, 0b101]];
        Cts::from_tiers(p, t.iter().map(|c| Tier::from_codes(c)).collect()).unwrap()
    }

    #[test]
    fn constants() {
        let p = Arc::new(Permutation::identity(5));
        let s4 = Cts::from_assignment(&Assignment::from_bits_str("01101").unwrap(), p.clone()).unwrap();
        assert_eq!(constant_of(&s4, VarId::new(2)), Constant::One);
        assert_eq!(constant_of(&s4, VarId::new(1)), Constant::Zero);
        let full = Cts::complete(p);
        assert!((1..=5).all(|v| constant_of(&full, VarId::new(v)) == Constant::Free));
    }

    #[test]
    fn pair_relations() {
        let r = pair_relation(&z(), VarId::new(1), VarId::new(2)).unwrap();
        assert_eq!(r.allowed, 0b0110);
        assert!(r.allows(false, true) && r.allows(true, false));
        let rev = pair_relation(&z(), VarId::new(2), VarId::new(1)).unwrap();
        assert!(rev.allows(true, false) && !rev.allows(true, true));
        let full = Cts::complete(z().perm().clone());
        assert_eq!(pair_relation(&full, VarId::new(3), VarId::new(5)).unwrap().allowed, 0b1111);
        assert!(pair_relation(&z(), VarId::new(1), VarId::new(4)).is_none());
    }

    #[test]
    fn self_unification_is_identity() {
        let out = unify(StructureSystem::new(vec![z(), z()]));
        assert_eq!(out.system().unwrap().structures, vec![z(), z()]);
    }

    #[test]
    fn conflicting_constants() {
        let p = Arc::new(Permutation::identity(5));
        let a = Cts::from_assignment(&Assignment::from_bits_str("00000").unwrap(), p.clone()).unwrap();
        let b = Cts::from_assignment(&Assignment::from_bits_str("10000").unwrap(), p).unwrap();
        match unify(StructureSystem::new(vec![a, b])) {
            UnifyOutcome::Empty { cause, .. } => {
                assert_eq!(cause, EmptyCause::ConstantConflict { var: VarId::new(1) })
            }
            other => panic!("expected empty system, got {other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        let e = Cts::empty(z().perm().clone());
        assert!(matches!(
            unify(StructureSystem::new(vec![z(), e])),
            UnifyOutcome::Empty {
                cause: EmptyCause::InputEmpty { structure: 1 },
                ..
            }
        ));
    }
}
