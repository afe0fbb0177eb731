//! Text dumps of every pipeline stage, in the tabular layout of [`Cts::render`].
//!
//! Files written (structure indices are 1-based):
//!
//! | file | content |
//! |---|---|
//! | `formula.txt` | the formula as a line table |
//! | `ctf_<i>.txt`, `cts_<i>.txt` | CT formulas and their structures |
//! | `unified_<i>.txt` | the whole system after unification |
//! | `pair_unified_<i>.txt` | the first two structures unified on their own |
//! | `pair_basic_graph.txt` | basic graph of the first unified pair member |
//! | `pair_hyperstructure.txt` | hyperstructure of the unified pair |
//! | `pair_jss.txt` | joint satisfying sets of the pair, in the second permutation's order then natural order |
//! | `sep.txt` | systemic procedure with the early check |
//! | `sep_system.txt` | systemic procedure without it, all substructures |
//! | `verdict.txt` | the classifier's verdict record |
//!
//! [`Cts::render`]: crate::cts::Cts::render

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::cts::{default_names, Cts};
use crate::decompose::{ctf_to_cts, decompose, Ctf, Strategy};
use crate::formula::{render_table, TabularFormula};
use crate::hyper::{effective_procedure, extract_jss, EpOutcome, ExtractConfig};
use crate::sep::{classify_with_decomposition, sep, ClassifyConfig, SepConfig, SepOutcome};
use crate::unify::{unify, StructureSystem, UnifyOutcome};

/// Upper bound on pair routes listed in `pair_jss.txt`.
pub const TRACE_ROUTE_LIMIT: usize = 1000;

/// Writes the dump files for `f` into `out`. Without `ctfs` the formula is
/// decomposed with `strategy`.
pub fn write_trace(f: &TabularFormula, ctfs: Option<Vec<Ctf>>, strategy: Strategy, out: &Path) -> io::Result<()> {
    fs::create_dir_all(out)?;
    let names = default_names(f.num_vars());
    let write = |name: &str, text: String| fs::write(out.join(name), text);
    write("formula.txt", render_table(f, &names))?;
    let canon = f.canonicalize();
    let ctfs = ctfs.unwrap_or_else(|| decompose(&canon, strategy).0);
    let structures: Vec<Cts> = ctfs.iter().map(ctf_to_cts).collect();
    for (i, (c, s)) in ctfs.iter().zip(&structures).enumerate() {
        write(&format!("ctf_{}.txt", i + 1), c.render(&names))?;
        write(&format!("cts_{}.txt", i + 1), s.render(&names))?;
    }
    let verdict = classify_with_decomposition(&canon, &ctfs, &ClassifyConfig::default()).verdict;
    write("verdict.txt", format!("{verdict}\n"))?;
    if structures.len() < 2 || structures.iter().any(|s| s.is_empty()) {
        return Ok(());
    }
    let unified = match unify(StructureSystem::new(structures.clone())) {
        UnifyOutcome::Unified { system, .. } => Some(system.structures),
        UnifyOutcome::Empty { cause, .. } => {
            write("unified_1.txt", format!("(empty) {cause:?}\n"))?;
            None
        }
    };
    if let Some(u) = &unified {
        for (i, s) in u.iter().enumerate() {
            write(&format!("unified_{}.txt", i + 1), s.render(&names))?;
        }
    }
    if let UnifyOutcome::Unified { system, .. } = unify(StructureSystem::new(structures[..2].to_vec())) {
        let pair = system.structures;
        for (i, s) in pair.iter().enumerate() {
            write(&format!("pair_unified_{}.txt", i + 1), s.render(&names))?;
        }
        if let Ok(outcome) = effective_procedure(&pair[0], &pair[1]) {
            match outcome {
                EpOutcome::Formed(h) => {
                    write("pair_basic_graph.txt", h.basic().render(&names))?;
                    write("pair_hyperstructure.txt", h.render(&names))?;
                    let cfg = ExtractConfig {
                        limit: TRACE_ROUTE_LIMIT,
                        ..Default::default()
                    };
                    if let Ok(x) = extract_jss(&h, cfg) {
                        let order = pair[1].perm().order();
                        let mut rows: Vec<String> = x
                            .assignments
                            .iter()
                            .map(|a| {
                                let in_perm: String =
                                    order.iter().map(|&v| if a.get(v) { '1' } else { '0' }).collect();
                                format!("{in_perm} {a}\n")
                            })
                            .collect();
                        rows.sort();
                        write("pair_jss.txt", rows.concat())?;
                    }
                }
                EpOutcome::Empty { tier } => {
                    write("pair_hyperstructure.txt", format!("(empty) tier {}\n", tier + 1))?;
                }
            }
        }
    }
    if let Some(u) = &unified {
        let early = sep(u, Some(&canon), SepConfig::default());
        let full = sep(
            u,
            Some(&canon),
            SepConfig {
                early_check: false,
                ..Default::default()
            },
        );
        write("sep.txt", describe(early.as_ref().ok()))?;
        let system = match full {
            Ok(SepOutcome::Complete(sys)) => sys.render(&names),
            other => describe(other.as_ref().ok()),
        };
        write("sep_system.txt", system)?;
    }
    Ok(())
}

fn describe(o: Option<&SepOutcome>) -> String {
    let mut s = String::new();
    match o {
        None => s.push_str("error\n"),
        Some(SepOutcome::Empty { tier }) => {
            let _ = writeln!(s, "empty at tier {}", tier + 1);
        }
        Some(SepOutcome::EarlyWitness {
            tier,
            witness,
            candidates,
        }) => {
            let _ = writeln!(s, "early witness at tier {}: {witness}", tier + 1);
            for c in candidates {
                let _ = writeln!(s, "candidate {c}");
            }
        }
        Some(SepOutcome::Complete(sys)) => {
            let _ = writeln!(
                s,
                "complete: tiers {:?}, {} restarts, {} unifications",
                sys.skeleton().tier_counts(),
                sys.restarts(),
                sys.unify_calls()
            );
        }
    }
    s
}
