//! Command-line front end.
//!
//! Verdict-producing commands exit with 10 (satisfiable), 20 (unsatisfiable)
//! or 30 (classification failure). Usage and I/O errors exit with 1.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::decompose::{parse_decomposition, Ctf, Strategy};
use crate::formula::{generate, parse_dimacs, GenMode, GenParams, TabularFormula};
use crate::oracle::difftest::{difftest, parse_range, write_outputs, ClauseRange, DifftestParams};
use crate::oracle::theorems::{theorem_sweep, SweepParams};
use crate::oracle::{brute_force, dpll};
use crate::sep::{classify_with, classify_with_decomposition, ClassifyConfig};
use crate::trace::write_trace;

#[derive(Debug, Parser)]
#[command(name = "ctsat", version, about = "Compact-triplet structures for 3-SAT")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Simple,
    Assemble,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Simple => Strategy::Simple,
            StrategyArg::Assemble => Strategy::Assemble,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Dpll,
    Brute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Free,
    Sat,
    Unsat,
}

impl From<ModeArg> for GenMode {
    fn from(m: ModeArg) -> GenMode {
        match m {
            ModeArg::Free => GenMode::Free,
            ModeArg::Sat => GenMode::PlantedSat,
            ModeArg::Unsat => GenMode::PlantedUnsat,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a DIMACS formula (`-` reads stdin).
    Classify {
        file: PathBuf,
        /// Also write a stage-by-stage dump into this directory.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "assemble")]
        strategy: StrategyArg,
        /// Use the CT formulas in this file instead of decomposing.
        #[arg(long)]
        decomposition: Option<PathBuf>,
        /// Print the verdict as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Decide a formula with a trusted engine.
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "dpll")]
        engine: Engine,
    },
    /// Generate a random formula in DIMACS.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Probability that a literal is negated.
        #[arg(long, default_value_t = 0.5)]
        neg: f64,
        #[arg(long, value_enum, default_value = "free")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare the classifier with DPLL on random instances.
    Difftest {
        #[arg(long, default_value = "5..16")]
        n_range: String,
        /// `C..D` clauses, or `3n..6n` for counts proportional to n.
        #[arg(long, default_value = "3n..6n")]
        m_range: String,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, default_value_t = 0.5)]
        neg: f64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "free,sat,unsat")]
        modes: Vec<ModeArg>,
    },
    /// Dump every pipeline stage as text tables.
    Trace {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "assemble")]
        strategy: StrategyArg,
        #[arg(long)]
        decomposition: Option<PathBuf>,
    },
    /// Check the hyperstructure equivalences on random small systems.
    Theorems {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value = "5..10")]
        n_range: String,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command, writing to
/// `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read_input(path: &Path) -> Result<String, String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| format!("stdin: {e}"))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn read_formula(path: &Path) -> Result<TabularFormula, String> {
    parse_dimacs(&read_input(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_decomposition(f: &TabularFormula, path: Option<&Path>) -> Result<Option<Vec<Ctf>>, String> {
    path.map(|p| parse_decomposition(f, &read_input(p)?).map_err(|e| format!("{}: {e}", p.display())))
        .transpose()
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, String> {
    let io_err = |e: io::Error| e.to_string();
    match cmd {
        Command::Classify {
            file,
            trace,
            strategy,
            decomposition,
            json,
        } => {
            let f = read_formula(&file)?;
            let ctfs = read_decomposition(&f, decomposition.as_deref())?;
            let cfg = ClassifyConfig {
                strategy: strategy.into(),
                ..Default::default()
            };
            let c = match &ctfs {
                Some(ctfs) => classify_with_decomposition(&f.canonicalize(), ctfs, &cfg),
                None => classify_with(&f, &cfg),
            };
            log::info!("stats: {:?}", c.stats);
            if json {
                writeln!(out, "{}", serde_json::to_string(&c.verdict).expect("verdict serializes")).map_err(io_err)?;
            } else {
                writeln!(out, "{}", c.verdict).map_err(io_err)?;
            }
            if let Some(dir) = trace {
                write_trace(&f, ctfs, strategy.into(), &dir).map_err(io_err)?;
            }
            Ok(c.verdict.exit_code())
        }
        Command::Oracle { file, engine } => {
            let f = read_formula(&file)?;
            let r = match engine {
                Engine::Dpll => dpll(&f),
                Engine::Brute => brute_force(&f).map_err(|e| e.to_string())?,
            };
            match &r.witness {
                Some(w) => writeln!(out, "SATISFIABLE {w}"),
                None => writeln!(out, "UNSATISFIABLE"),
            }
            .map_err(io_err)?;
            if let Some(c) = r.model_count {
                writeln!(out, "models {c}").map_err(io_err)?;
            }
            Ok(if r.satisfiable { 10 } else { 20 })
        }
        Command::Gen {
            n,
            m,
            neg,
            mode,
            seed,
            output,
        } => {
            let f = generate(&GenParams {
                n,
                m,
                negation_fraction: neg,
                mode: mode.into(),
                seed,
            })
            .map_err(|e| e.to_string())?;
            match output {
                Some(p) => fs::write(&p, f.to_dimacs()).map_err(|e| format!("{}: {e}", p.display()))?,
                None => out.write_all(f.to_dimacs().as_bytes()).map_err(io_err)?,
            }
            Ok(0)
        }
        Command::Difftest {
            n_range,
            m_range,
            count,
            seed,
            out: dir,
            jobs,
            neg,
            modes,
        } => {
            let (n_min, n_max) = parse_range(&n_range).map_err(|e| e.to_string())?;
            let clauses: ClauseRange = m_range.parse().map_err(|e: crate::oracle::difftest::DifftestError| e.to_string())?;
            let params = DifftestParams {
                n_min,
                n_max,
                clauses,
                count,
                seed,
                negation_fraction: neg,
                modes: modes.into_iter().map(GenMode::from).collect(),
            };
            let outcome = difftest(&params, jobs).map_err(|e| e.to_string())?;
            write_outputs(&dir, &outcome).map_err(|e| e.to_string())?;
            let r = &outcome.report;
            writeln!(
                out,
                "instances {} agreements {} disagreements {} failures {} soundness_violations {} findings {}",
                r.instances,
                r.agreements,
                r.disagreements,
                r.classification_failures,
                r.soundness_violations,
                r.findings.len()
            )
            .map_err(io_err)?;
            Ok(0)
        }
        Command::Trace {
            file,
            out: dir,
            strategy,
            decomposition,
        } => {
            let f = read_formula(&file)?;
            let ctfs = read_decomposition(&f, decomposition.as_deref())?;
            write_trace(&f, ctfs, strategy.into(), &dir).map_err(io_err)?;
            writeln!(out, "trace written to {}", dir.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Theorems {
            count,
            n_range,
            k_max,
            seed,
            out: dir,
        } => {
            let (n_min, n_max) = parse_range(&n_range).map_err(|e| e.to_string())?;
            if n_min < 3 || n_max > 16 || k_max < 2 {
                return Err("theorems needs 3 <= n <= 16 and k-max >= 2".into());
            }
            let params = SweepParams {
                count,
                n_min,
                n_max,
                k_max,
                seed,
                ..Default::default()
            };
            let r = theorem_sweep(&params, Some(&dir)).map_err(io_err)?.report;
            writeln!(
                out,
                "systems {} pair equivalence {}/{} violations, system equivalence {}/{} violations, backtracks {}",
                r.systems,
                r.pair_equivalence_violations,
                r.pair_equivalence_checked,
                r.system_equivalence_violations,
                r.system_equivalence_checked,
                r.backtracks_total
            )
            .map_err(io_err)?;
            Ok(0)
        }
    }
}
