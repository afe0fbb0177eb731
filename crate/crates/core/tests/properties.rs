//! Exactness properties checked against naive set oracles on n <= 12.

mod common;

use std::collections::BTreeSet;

use common::*;
use ctsat::cts::{Cts, Tier};
use ctsat::decompose::ctf_to_cts;
use ctsat::formula::{GenMode, GenParams, TabularFormula};
use ctsat::hyper::{effective_procedure, project_tier, shift, EpOutcome};
use ctsat::oracle::dpll;
use ctsat::oracle::minimize::minimize;
use ctsat::unify::{unify, StructureSystem, UnifyOutcome};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn clearing_matches_naive_fixpoint_in_any_order(seed in any::<u64>(), n in 3usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = random_perm(&mut rng, n);
        let masks: Vec<u8> = (0..n - 2).map(|_| rng.random()).collect();
        let mut order = in_order(n - 2);
        order.shuffle(&mut rng);
        let expected = naive_clear(masks.clone(), &order);
        prop_assert_eq!(&expected, &naive_clear(masks.clone(), &in_order(n - 2)));
        let s = Cts::from_tiers(perm.clone(), masks.into_iter().map(Tier::from_mask).collect()).unwrap();
        prop_assert_eq!(naive_of(&s), expected);
    }

    #[test]
    fn intersection_is_exact(seed in any::<u64>(), n in 3usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = random_perm(&mut rng, n);
        let (a, b) = (random_cts(&mut rng, &perm), random_cts(&mut rng, &perm));
        let both: BTreeSet<u32> = models(&a).intersection(&models(&b)).copied().collect();
        let i = a.intersect(&b).unwrap();
        prop_assert_eq!(models(&i), both.clone());
        prop_assert_eq!(naive_models(&perm, &naive_of(&i)), both);
    }

    #[test]
    fn concretization_is_exact(seed in any::<u64>(), n in 3usize..=12, value in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = random_perm(&mut rng, n);
        let s = random_cts(&mut rng, &perm);
        let var = ctsat::VarId::new(rng.random_range(1..=n as u32));
        let expected: BTreeSet<u32> = models(&s)
            .into_iter()
            .filter(|a| (a >> var.offset() & 1 == 1) == value)
            .collect();
        prop_assert_eq!(models(&s.concretize(var, value)), expected);
    }

    #[test]
    fn union_over_approximates(seed in any::<u64>(), n in 3usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = random_perm(&mut rng, n);
        let (a, b) = (random_cts(&mut rng, &perm), random_cts(&mut rng, &perm));
        let u = models(&a.union(&b).unwrap());
        prop_assert!(models(&a).is_subset(&u));
        prop_assert!(models(&b).is_subset(&u));
    }

    #[test]
    fn ctf_transform_equals_brute_force(seed in any::<u64>(), n in 3usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = random_perm(&mut rng, n);
        let m = rng.random_range(0..=3 * n);
        let ctf = random_ctf(&mut rng, &perm, m);
        prop_assert_eq!(models(&ctf_to_cts(&ctf)), formula_models(&ctf.to_formula()));
    }

    #[test]
    fn unification_preserves_joint_set(seed in any::<u64>(), n in 4usize..=10, k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let structures: Vec<Cts> = (0..k)
            .map(|_| {
                let perm = random_perm(&mut rng, n);
                let m = rng.random_range(0..=n);
                ctf_to_cts(&random_ctf(&mut rng, &perm, m))
            })
            .collect();
        let joint = |ss: &[Cts]| {
            ss.iter().map(models).reduce(|x, y| x.intersection(&y).copied().collect()).unwrap()
        };
        let before = joint(&structures);
        match unify(StructureSystem::new(structures)) {
            UnifyOutcome::Unified { system, .. } => {
                prop_assert_eq!(joint(&system.structures), before);
                for s in &system.structures {
                    prop_assert!(!s.is_empty());
                }
            }
            UnifyOutcome::Empty { .. } => prop_assert!(before.is_empty()),
        }
    }

    #[test]
    fn projection_and_shift_match_naive(seed in any::<u64>(), n in 4usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p1 = random_perm(&mut rng, n);
        let p2 = random_perm(&mut rng, n);
        let (s1, s2) = (random_cts(&mut rng, &p1), random_cts(&mut rng, &p2));
        prop_assume!(!s1.is_empty() && !s2.is_empty());
        let EpOutcome::Formed(h) = effective_procedure(&s1, &s2).unwrap() else {
            return Ok(());
        };
        let k = n - 2;
        let project = |r: usize, target: &Naive| -> Naive {
            let t = target.as_ref()?;
            let mut acc: Option<Vec<u8>> = None;
            for (_, sub) in h.tier_subs(r) {
                let Some(sm) = naive_of(sub) else { continue };
                let anded: Vec<u8> = sm.iter().zip(t).map(|(a, b)| a & b).collect();
                if let Some(part) = naive_clear(anded, &in_order(k)) {
                    acc = Some(match acc {
                        None => part,
                        Some(a) => a.iter().zip(&part).map(|(x, y)| x | y).collect(),
                    });
                }
            }
            acc
        };
        let r = rng.random_range(0..h.num_tiers());
        let target = random_cts(&mut rng, &p2);
        prop_assert_eq!(naive_of(&project_tier(&h, r, &target)), project(r, &naive_of(&target)));

        for j in 0..h.num_tiers() - 1 {
            for (u, w) in h.skeleton().edges(j).collect::<Vec<_>>() {
                let tail = naive_of(h.vertex_sub(j, u).unwrap());
                let var = p1.var_at(j + 3);
                let pos = p2.position(var);
                let fixed = tail.and_then(|t| {
                    let masked = t
                        .iter()
                        .enumerate()
                        .map(|(s, &m)| {
                            if s + 2 < pos || s > pos {
                                return m;
                            }
                            let shift_by = 2 - (pos - s);
                            (0..8u8)
                                .filter(|&c| has(m, c) && (c >> shift_by & 1 == 1) == w.bit(2))
                                .fold(0, |acc, c| acc | 1 << c)
                        })
                        .collect();
                    naive_clear(masked, &in_order(k))
                });
                let mut expected = fixed;
                for s in 0..j {
                    if expected.is_none() {
                        break;
                    }
                    expected = project(s, &expected);
                }
                prop_assert_eq!(naive_of(&shift(&h, j, u, w)), expected);
            }
        }
    }
}

#[test]
fn union_strictness_witness_exists() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let found = (0..500).any(|_| {
        let perm = random_perm(&mut rng, 6);
        let (a, b) = (random_cts(&mut rng, &perm), random_cts(&mut rng, &perm));
        let exact: BTreeSet<u32> = models(&a).union(&models(&b)).copied().collect();
        models(&a.union(&b).unwrap()) != exact
    });
    assert!(found);
}

#[test]
fn non_distributivity_witness_exists() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let found = (0..500).any(|_| {
        let perm = random_perm(&mut rng, 6);
        let a = random_cts(&mut rng, &perm);
        let b = random_cts(&mut rng, &perm);
        let c = random_cts(&mut rng, &perm);
        let lhs = a.intersect(&b.union(&c).unwrap()).unwrap();
        let rhs = a.intersect(&b).unwrap().union(&a.intersect(&c).unwrap()).unwrap();
        !lhs.equivalent(&rhs).unwrap()
    });
    assert!(found);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn minimization_is_idempotent(seed in any::<u64>(), n in 4usize..=9) {
        let f = ctsat::formula::generate(&GenParams {
            n,
            m: 3 * n,
            negation_fraction: 0.5,
            mode: GenMode::PlantedUnsat,
            seed,
        })
        .unwrap();
        let pred = |g: &TabularFormula| !dpll(g).satisfiable;
        let once = minimize(&f, &pred).unwrap().formula;
        let twice = minimize(&once, &pred).unwrap().formula;
        prop_assert_eq!(twice, once);
    }
}
