//! Acceptance criteria. Runs without the test harness so the PASS or FAIL
//! line of each criterion is always printed. Exits nonzero if any fails.
//! Artifacts go under the cargo test tmpdir.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use ctsat::cts::{default_names, Cts, Permutation, Tier};
use ctsat::decompose::{ctf_to_cts, parse_decomposition, Ctf};
use ctsat::formula::{parse_dimacs, Assignment, GenMode, GenParams, TabularFormula};
use ctsat::hyper::{effective_procedure, extract_jss, BasicGraph, EpOutcome, ExtractConfig};
use ctsat::oracle::difftest::{difftest, write_outputs, ClauseRange, DifftestParams, FindingKind};
use ctsat::oracle::theorems::{theorem_sweep, SweepParams};
use ctsat::sep::{classify_with, ClassifyConfig, Verdict};
use ctsat::unify::{unify, StructureSystem, UnifyOutcome};
use ctsat::VarId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn read(rel: &str) -> String {
    fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn artifacts(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn identity5() -> Arc<Permutation> {
    Arc::new(Permutation::identity(5))
}

fn raw(codes: &[&[u8]]) -> Cts {
    Cts::from_raw_tiers(identity5(), codes.iter().map(|c| Tier::from_codes(c)).collect()).unwrap()
}

fn bits(set: &BTreeSet<Assignment>) -> Vec<String> {
    set.iter().map(|a| a.to_string()).collect()
}

fn example8() -> (TabularFormula, Vec<Ctf>) {
    let f = parse_dimacs(&read("example8.cnf")).unwrap();
    let ctfs = parse_decomposition(&f, &read("example8.decomp")).unwrap();
    (f, ctfs)
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn worked_example() -> Check {
    let f1 = parse_dimacs(&read("f1.cnf")).unwrap();
    let mut ctf = Ctf::new(identity5());
    for c in f1.clauses() {
        ctf.add_clause(*c).map_err(|e| e.to_string())?;
    }
    let mut times = Vec::new();
    let mut z = ctf_to_cts(&ctf);
    for _ in 0..5 {
        let t = Instant::now();
        z = ctf_to_cts(&ctf);
        times.push(t.elapsed());
    }
    let expected = raw(&[&[0b011, 0b100], &[0b110, 0b001], &[0b101, 0b011]]);
    ensure(z == expected, format!("Z differs:\n{}", z.render(&default_names(5))))?;
    let ss = bits(&z.enumerate_assignments().unwrap());
    ensure(ss == ["01101", "10011"], format!("satisfying sets {ss:?}"))?;
    let t = median(times);
    ensure(t < Duration::from_millis(1), format!("transform took {t:?}"))?;
    Ok(format!("Z exact, sets {ss:?}, {t:?}"))
}

fn algebra_examples() -> Check {
    let s1 = raw(&[&[0b010, 0b011], &[0b101, 0b110], &[0b011, 0b100, 0b101]]);
    let s2 = raw(&[&[0b011, 0b100], &[0b110, 0b001], &[0b101, 0b011]]);
    let s3 = s1.union(&s2).unwrap();
    ensure(
        s3 == raw(&[&[0b010, 0b011, 0b100], &[0b101, 0b110, 0b001], &[0b011, 0b100, 0b101]]),
        "S1 | S2",
    )?;
    let s4 = s1.intersect(&s2).unwrap();
    ensure(s4 == raw(&[&[0b011], &[0b110], &[0b101]]), "S1 & S2")?;
    let raw_meet: Vec<u8> = s1.tiers().iter().zip(s2.tiers()).map(|(a, b)| a.mask() & b.mask()).collect();
    ensure(
        Tier::from_mask(raw_meet[2]).contains(ctsat::TripletLine::new(0b011)),
        "011 should be present before clearing",
    )?;
    let c3 = s3.concretize(VarId::new(3), true);
    ensure(c3 == raw(&[&[0b011], &[0b110], &[0b100, 0b101]]), "S3(x3 -> 1)")?;
    ensure(s4.concretize(VarId::new(5), false).is_empty(), "S4(x5 -> 0) not empty")?;
    Ok("union, intersection with clearing, both concretizations bit-exact".into())
}

fn permuted_structures() -> Check {
    let (_, ctfs) = example8();
    let names = default_names(8);
    let orders: Vec<String> = ctfs
        .iter()
        .map(|c| c.perm().order().iter().map(|v| names[v.offset()].as_str()).collect::<Vec<_>>().join(""))
        .collect();
    ensure(orders == ["abcdefgh", "hgbeafcd", "dfachebg"], format!("permutations {orders:?}"))?;
    for (i, ctf) in ctfs.iter().enumerate().skip(1) {
        let got = ctf_to_cts(ctf).render(&names);
        ensure(got == read(&format!("golden/example8/cts_{}.txt", i + 1)), format!("S{} differs", i + 1))?;
    }
    Ok("S2, S3 tier-for-tier".into())
}

fn unified(structures: Vec<Cts>) -> Result<Vec<Cts>, String> {
    match unify(StructureSystem::new(structures)) {
        UnifyOutcome::Unified { system, .. } => Ok(system.structures),
        UnifyOutcome::Empty { cause, .. } => Err(format!("unification emptied: {cause:?}")),
    }
}

fn unification_goldens() -> Check {
    let (_, ctfs) = example8();
    let names = default_names(8);
    let s: Vec<Cts> = ctfs.iter().map(ctf_to_cts).collect();
    let pair = unified(s[..2].to_vec())?;
    for (i, u) in pair.iter().enumerate() {
        ensure(
            u.render(&names) == read(&format!("golden/example8/pair_unified_{}.txt", i + 1)),
            format!("pair S{}", i + 1),
        )?;
    }
    let triple = unified(s)?;
    for (i, u) in triple.iter().enumerate() {
        ensure(
            u.render(&names) == read(&format!("golden/example8/unified_{}.txt", i + 1)),
            format!("triple S{}", i + 1),
        )?;
    }
    Ok("pair and triple unification tier-wise equal".into())
}

fn hyperstructure_reproduction() -> Check {
    let (_, ctfs) = example8();
    let names = default_names(8);
    let s: Vec<Cts> = ctfs.iter().map(ctf_to_cts).collect();
    let pair = unified(s[..2].to_vec())?;
    let bg = BasicGraph::from_cts(&pair[0]).map_err(|e| e.to_string())?;
    ensure(bg.render(&names) == read("golden/example8/pair_basic_graph.txt"), "basic graph")?;
    ensure(bg.edge_count() == 14, format!("{} edges", bg.edge_count()))?;
    let EpOutcome::Formed(h) = effective_procedure(&pair[0], &pair[1]).map_err(|e| e.to_string())? else {
        return Err("effective procedure came out empty".into());
    };
    ensure(h.render(&names) == read("golden/example8/pair_hyperstructure.txt"), "hyperstructure")?;
    let x = extract_jss(
        &h,
        ExtractConfig {
            limit: usize::MAX,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let order = pair[1].perm().order();
    let mut got: Vec<String> = x
        .assignments
        .iter()
        .map(|a| order.iter().map(|&v| if a.get(v) { '1' } else { '0' }).collect())
        .collect();
    got.sort();
    let want = ["00010110", "00010111", "00011110", "00011111", "11010011"];
    ensure(got == want, format!("sets {got:?}"))?;
    Ok(format!("populations {:?}, 14 edges, 5 sets", bg.tier_counts()))
}

fn end_to_end_example8() -> Check {
    let f = parse_dimacs(&read("example8.cnf")).unwrap();
    let c = classify_with(&f, &ClassifyConfig::default());
    let Verdict::Satisfiable { witness } = &c.verdict else {
        return Err(format!("verdict {}", c.verdict));
    };
    ensure(f.evaluate(witness).unwrap(), "witness does not satisfy")?;
    if let Some(tier) = c.stats.early_tier {
        let w = witness.to_string();
        ensure(["00111011", "10111100"].contains(&w.as_str()), format!("early witness {w} at tier {tier}"))?;
    }
    Ok(format!("{} (early check tier {})", c.verdict, c.stats.early_tier.map_or("none".into(), |t| (t + 1).to_string())))
}

fn oracle_sweep() -> Check {
    let params = DifftestParams {
        n_min: 5,
        n_max: 16,
        clauses: ClauseRange::PerVariable { lo: 3.0, hi: 6.0 },
        count: 10_000,
        seed: 20_000,
        negation_fraction: 0.5,
        modes: vec![GenMode::Free, GenMode::PlantedSat, GenMode::PlantedUnsat],
    };
    let out = artifacts("difftest");
    let t = Instant::now();
    let outcome = difftest(&params, 0).map_err(|e| e.to_string())?;
    write_outputs(&out, &outcome).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let r = &outcome.report;
    ensure(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    ensure(r.soundness_violations == 0, format!("{} soundness violations", r.soundness_violations))?;
    ensure(r.oracle_mismatches == 0, format!("{} oracle mismatches", r.oracle_mismatches))?;
    for f in &outcome.findings {
        if matches!(f.kind, FindingKind::Disagreement | FindingKind::ClassificationFailure) {
            let dir = out.join("findings").join(f.dir_name());
            ensure(dir.join("minimized.cnf").is_file(), format!("{} lacks a reproducer", dir.display()))?;
        }
    }
    Ok(format!(
        "{} instances in {:.1}s: {} agree, {} disagree, {} failures, 0 unsound; report {}",
        r.instances,
        elapsed.as_secs_f64(),
        r.agreements,
        r.disagreements,
        r.classification_failures,
        out.join("report.json").display()
    ))
}

fn exactness_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut union_strict = false;
    let mut non_distributive = false;
    let mut checked = 0usize;
    for round in 0..400 {
        let n = 3 + round % 10;
        let perm = random_perm(&mut rng, n);
        let a = random_cts(&mut rng, &perm);
        let b = random_cts(&mut rng, &perm);
        let c = random_cts(&mut rng, &perm);
        let (ma, mb) = (naive_models(&perm, &naive_of(&a)), naive_models(&perm, &naive_of(&b)));

        let meet: BTreeSet<u32> = ma.intersection(&mb).copied().collect();
        ensure(models(&a.intersect(&b).unwrap()) == meet, format!("intersection inexact, n={n}"))?;

        let var = VarId::new(1 + (round as u32 * 7) % n as u32);
        for value in [false, true] {
            let want: BTreeSet<u32> = ma.iter().copied().filter(|x| (x >> var.offset() & 1 == 1) == value).collect();
            ensure(models(&a.concretize(var, value)) == want, format!("concretization inexact, n={n}"))?;
        }

        let join: BTreeSet<u32> = ma.union(&mb).copied().collect();
        let u = models(&a.union(&b).unwrap());
        ensure(join.is_subset(&u), format!("union lost sets, n={n}"))?;
        union_strict |= join != u;

        let lhs = a.intersect(&b.union(&c).unwrap()).unwrap();
        let rhs = a.intersect(&b).unwrap().union(&a.intersect(&c).unwrap()).unwrap();
        non_distributive |= !lhs.equivalent(&rhs).unwrap();

        let ctf = random_ctf(&mut rng, &perm, n + round % (2 * n));
        let s = ctf_to_cts(&ctf);
        ensure(models(&s) == formula_models(&ctf.to_formula()), format!("CTF transform inexact, n={n}"))?;

        let others: Vec<Cts> = (0..1 + round % 3)
            .map(|_| {
                let p = random_perm(&mut rng, n);
                ctf_to_cts(&random_ctf(&mut rng, &p, n / 2 + round % n))
            })
            .collect();
        let system: Vec<Cts> = std::iter::once(s).chain(others).collect();
        let joint = |ss: &[Cts]| {
            ss.iter()
                .map(models)
                .reduce(|x, y| x.intersection(&y).copied().collect())
                .unwrap()
        };
        let before = joint(&system);
        match unify(StructureSystem::new(system)) {
            UnifyOutcome::Unified { system, .. } => {
                ensure(joint(&system.structures) == before, format!("unification changed joint set, n={n}"))?
            }
            UnifyOutcome::Empty { .. } => ensure(before.is_empty(), format!("unification lost sets, n={n}"))?,
        }
        checked += 1;
    }
    ensure(union_strict, "no union strictness witness")?;
    ensure(non_distributive, "no non-distributivity witness")?;
    Ok(format!("{checked} rounds over n=3..12, strict union and non-distributivity witnessed"))
}

fn theorem_checks() -> Check {
    let params = SweepParams {
        count: 3000,
        n_min: 5,
        n_max: 10,
        k_max: 4,
        seed: 9,
        backtrack_budget: 100_000,
    };
    let out = artifacts("theorems");
    let r = theorem_sweep(&params, Some(&out)).map_err(|e| e.to_string())?.report;
    ensure(r.unified >= 2000, format!("only {} unified systems", r.unified))?;
    ensure(r.pair_equivalence_checked > 0 && r.system_equivalence_checked >= 2000, "too few theorem checks")?;
    ensure(out.join("theorems.json").is_file(), "report missing")?;
    for v in &r.violations {
        ensure(out.join(&v.dir).join("record.json").is_file(), format!("{} not archived", v.dir))?;
    }
    Ok(format!(
        "{} unified systems; pair equivalence {} violations / {}, route bijection {} / {}, system equivalence {} / {}; backtracks total {} max {}; {} archived",
        r.unified,
        r.pair_equivalence_violations,
        r.pair_equivalence_checked,
        r.route_bijection_violations,
        r.route_bijection_checked,
        r.system_equivalence_violations,
        r.system_equivalence_checked,
        r.backtracks_total,
        r.backtracks_max,
        r.violations.len()
    ))
}

fn performance() -> Check {
    let (n, m) = (50, 300);
    let bound = 8 * (n - 2);
    let mut summary = Vec::new();
    for mode in [GenMode::Free, GenMode::PlantedSat] {
        let mut times = Vec::new();
        let mut worst_vertices = 0;
        let mut worst_lines = 0;
        for seed in 1..=20 {
            let f = ctsat::formula::generate(&GenParams {
                n,
                m,
                negation_fraction: 0.5,
                mode,
                seed,
            })
            .unwrap();
            let t = Instant::now();
            let c = classify_with(&f, &ClassifyConfig::default());
            times.push(t.elapsed());
            ensure(
                !matches!(&c.verdict, Verdict::Satisfiable { witness } if !f.evaluate(witness).unwrap()),
                "unsound witness",
            )?;
            worst_vertices = worst_vertices.max(c.stats.vertex_subs);
            worst_lines = worst_lines.max(c.stats.max_sub_lines);
        }
        let med = median(times.clone());
        let max = times.iter().max().copied().unwrap_or_default();
        ensure(med < Duration::from_secs(30), format!("{mode:?} median {med:?}"))?;
        ensure(
            worst_vertices <= bound && worst_lines <= bound,
            format!("{mode:?}: {worst_vertices} substructure vertices, {worst_lines} lines, bound {bound}"),
        )?;
        summary.push(format!(
            "{mode:?} median {:.2}s max {:.2}s, <= {worst_vertices} subs of <= {worst_lines} lines",
            med.as_secs_f64(),
            max.as_secs_f64()
        ));
    }
    Ok(format!("{} (bound {bound})", summary.join("; ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked example transform", worked_example),
        ("algebra examples", algebra_examples),
        ("fixed permutations give S2 and S3", permuted_structures),
        ("unification goldens", unification_goldens),
        ("basic graph, hyperstructure and joint sets", hyperstructure_reproduction),
        ("end-to-end eight-variable example", end_to_end_example8),
        ("oracle-equivalence sweep", oracle_sweep),
        ("exactness properties", exactness_properties),
        ("theorems as empirical checks", theorem_checks),
        ("performance at n=50, m=300", performance),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
