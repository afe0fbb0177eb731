//! Naive set oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use ctsat::cts::{Cts, Permutation, Tier, TripletLine};
use ctsat::decompose::Ctf;
use ctsat::formula::{Assignment, Clause, TabularFormula};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Tier masks, `None` for the empty structure.
pub type Naive = Option<Vec<u8>>;

pub fn naive_of(s: &Cts) -> Naive {
    (!s.is_empty()).then(|| s.tiers().iter().map(|t| t.mask()).collect())
}

pub fn has(mask: u8, code: u8) -> bool {
    mask >> code & 1 == 1
}

/// Removes unsupported lines until nothing changes, visiting tiers in `order`.
pub fn naive_clear(mut t: Vec<u8>, order: &[usize]) -> Naive {
    let last = t.len() - 1;
    loop {
        let mut changed = false;
        for &j in order {
            for code in 0..8u8 {
                if !has(t[j], code) {
                    continue;
                }
                let left = j == 0 || (0..8u8).any(|u| has(t[j - 1], u) && u & 3 == code >> 1);
                let right = j == last || (0..8u8).any(|w| has(t[j + 1], w) && code & 3 == w >> 1);
                if !(left && right) {
                    t[j] &= !(1 << code);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    t.iter().all(|&m| m != 0).then_some(t)
}

pub fn in_order(k: usize) -> Vec<usize> {
    (0..k).collect()
}

pub fn line_of(perm: &Permutation, a: u32, j: usize) -> u8 {
    let w = perm.window(j);
    let bit = |v: ctsat::VarId| (a >> v.offset() & 1) as u8;
    4 * bit(w[0]) + 2 * bit(w[1]) + bit(w[2])
}

/// Assignments as integers, bit `i` holding variable `i + 1`.
pub fn naive_models(perm: &Permutation, t: &Naive) -> BTreeSet<u32> {
    let Some(t) = t else { return BTreeSet::new() };
    (0..1u32 << perm.len())
        .filter(|&a| t.iter().enumerate().all(|(j, &m)| has(m, line_of(perm, a, j))))
        .collect()
}

pub fn as_int(a: &Assignment) -> u32 {
    a.bits().iter().enumerate().map(|(i, &b)| u32::from(b) << i).sum()
}

pub fn models(s: &Cts) -> BTreeSet<u32> {
    s.enumerate_assignments().unwrap().iter().map(as_int).collect()
}

pub fn formula_models(f: &TabularFormula) -> BTreeSet<u32> {
    (0..1u32 << f.num_vars())
        .filter(|&a| {
            let bits = (0..f.num_vars()).map(|i| a >> i & 1 == 1).collect();
            f.evaluate(&Assignment::new(bits)).unwrap()
        })
        .collect()
}

pub fn random_perm(rng: &mut ChaCha8Rng, n: usize) -> Arc<Permutation> {
    let mut order: Vec<u32> = (1..=n as u32).collect();
    order.shuffle(rng);
    Arc::new(Permutation::from_indices(&order).unwrap())
}

/// Dense random tiers so that clearing usually leaves something.
pub fn random_masks(rng: &mut ChaCha8Rng, k: usize) -> Vec<u8> {
    (0..k).map(|_| rng.random::<u8>() | rng.random::<u8>()).collect()
}

pub fn random_cts(rng: &mut ChaCha8Rng, perm: &Arc<Permutation>) -> Cts {
    let tiers = random_masks(rng, perm.num_tiers()).into_iter().map(Tier::from_mask).collect();
    Cts::from_tiers(perm.clone(), tiers).unwrap()
}

pub fn random_ctf(rng: &mut ChaCha8Rng, perm: &Arc<Permutation>, clauses: usize) -> Ctf {
    let mut ctf = Ctf::new(perm.clone());
    for _ in 0..clauses {
        let j = rng.random_range(0..perm.num_tiers());
        let line = TripletLine::new(rng.random_range(0..8));
        let w = perm.window(j);
        let c = Clause::new([(w[0], line.bit(0)), (w[1], line.bit(1)), (w[2], line.bit(2))]).unwrap();
        ctf.add_clause(c).unwrap();
    }
    ctf
}
