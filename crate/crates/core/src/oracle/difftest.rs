//! Differential testing of the classifier against DPLL.
//!
//! Instance `i` is drawn from a ChaCha8 stream seeded with `seed + i`
//! (wrapping), so results do not depend on the worker count. Disagreements
//! and classification failures are minimized and archived as findings; they
//! never abort the run.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! report.json                  deterministic summary
//! timing.json                  wall-clock statistics
//! findings/<index>-<kind>/
//!     original.cnf  minimized.cnf  verdicts.json  diagnostics.json  seed.txt
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::minimize::minimize;
use super::{brute_force, dpll, OracleResult};
use crate::formula::{generate, GenMode, GenParams, TabularFormula, RNG_ALGORITHM};
use crate::sep::{classify_with, Classification, ClassifyConfig, Verdict};

/// Variables up to this size are also checked by brute force.
pub const CROSS_CHECK_BOUND: usize = 12;

#[derive(Debug, Error)]
pub enum DifftestError {
    #[error("invalid difftest parameters: {0}")]
    InvalidParams(String),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Inclusive range of clause counts, absolute or per variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClauseRange {
    Absolute { lo: usize, hi: usize },
    /// `ceil(lo * n) ..= ceil(hi * n)`.
    PerVariable { lo: f64, hi: f64 },
}

impl ClauseRange {
    pub fn bounds(&self, n: usize) -> (usize, usize) {
        match *self {
            ClauseRange::Absolute { lo, hi } => (lo, hi),
            ClauseRange::PerVariable { lo, hi } => ((lo * n as f64).ceil() as usize, (hi * n as f64).ceil() as usize),
        }
    }
}

/// Parses `A..B` into an inclusive pair.
pub fn parse_range(s: &str) -> Result<(usize, usize), DifftestError> {
    let bad = || DifftestError::InvalidParams(format!("expected A..B, got `{s}`"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(DifftestError::InvalidParams(format!("empty range `{s}`")));
    }
    Ok((a, b))
}

/// `C..D` for absolute counts, `3n..6n` for counts proportional to `n`.
impl FromStr for ClauseRange {
    type Err = DifftestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((a, b)) = s.split_once("..") {
            if let (Some(a), Some(b)) = (a.trim().strip_suffix('n'), b.trim().strip_suffix('n')) {
                let bad = || DifftestError::InvalidParams(format!("bad ratio range `{s}`"));
                let lo: f64 = a.parse().map_err(|_| bad())?;
                let hi: f64 = b.parse().map_err(|_| bad())?;
                if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
                    return Err(bad());
                }
                return Ok(ClauseRange::PerVariable { lo, hi });
            }
        }
        let (lo, hi) = parse_range(s)?;
        Ok(ClauseRange::Absolute { lo, hi })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifftestParams {
    pub n_min: usize,
    pub n_max: usize,
    pub clauses: ClauseRange,
    pub count: usize,
    pub seed: u64,
    pub negation_fraction: f64,
    pub modes: Vec<GenMode>,
}

impl DifftestParams {
    pub fn validate(&self) -> Result<(), DifftestError> {
        let bad = |m: String| Err(DifftestError::InvalidParams(m));
        if self.n_min < 3 || self.n_min > self.n_max {
            return bad(format!("bad variable range {}..{}", self.n_min, self.n_max));
        }
        if self.modes.is_empty() {
            return bad("no generation modes".into());
        }
        for n in [self.n_min, self.n_max] {
            let (lo, hi) = self.clauses.bounds(n);
            if lo == 0 || lo > hi {
                return bad(format!("bad clause range {lo}..{hi} at n = {n}"));
            }
        }
        if !(0.0..=1.0).contains(&self.negation_fraction) {
            return bad(format!("negation fraction {}", self.negation_fraction));
        }
        Ok(())
    }

    /// Generator parameters of instance `index`.
    pub fn instance(&self, index: usize) -> GenParams {
        let seed = self.seed.wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(self.n_min..=self.n_max);
        let (lo, hi) = self.clauses.bounds(n);
        let m = rng.random_range(lo..=hi);
        let mode = self.modes[rng.random_range(0..self.modes.len())];
        GenParams {
            n,
            m,
            negation_fraction: self.negation_fraction,
            mode,
            seed: rng.random(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Disagreement,
    ClassificationFailure,
    SoundnessViolation,
}

impl FindingKind {
    fn slug(self) -> &'static str {
        match self {
            FindingKind::Disagreement => "disagreement",
            FindingKind::ClassificationFailure => "failure",
            FindingKind::SoundnessViolation => "soundness",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub seed: u64,
    pub params: GenParams,
    pub verdict: String,
    pub oracle_sat: bool,
    pub agree: bool,
    pub soundness_violation: bool,
    pub oracle_mismatch: bool,
    pub cross_checked: bool,
    pub stage: Option<String>,
    pub early_tier: Option<usize>,
    pub k: usize,
    pub backtracks: u64,
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub index: usize,
    pub kind: FindingKind,
    pub seed: u64,
    pub params: GenParams,
    pub original: String,
    pub minimized: Option<String>,
    pub minimize_error: Option<String>,
    pub verdict: Verdict,
    pub oracle: OracleResult,
    pub minimized_verdict: Option<Verdict>,
    pub stats: crate::sep::ClassifyStats,
}

impl Finding {
    pub fn dir_name(&self) -> String {
        format!("{:06}-{}", self.index, self.kind.slug())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FindingSummary {
    pub index: usize,
    pub kind: FindingKind,
    pub seed: u64,
    pub dir: String,
    pub n: usize,
    pub m: usize,
    pub minimized_clauses: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifftestReport {
    pub version: String,
    pub rng: String,
    pub seed_policy: String,
    pub params: DifftestParams,
    pub instances: usize,
    /// Classifier verdict label, then oracle label, to count.
    pub matrix: BTreeMap<String, BTreeMap<String, usize>>,
    pub agreements: usize,
    pub disagreements: usize,
    pub soundness_violations: usize,
    pub classification_failures: usize,
    pub oracle_cross_checks: usize,
    pub oracle_mismatches: usize,
    pub unsat_by_stage: BTreeMap<String, usize>,
    pub early_witnesses: usize,
    pub backtracks_total: u64,
    pub backtracks_max: u64,
    pub restarts_total: usize,
    pub k_max: usize,
    pub findings: Vec<FindingSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub jobs: usize,
    pub total_seconds: f64,
    pub classify_seconds: f64,
    pub oracle_seconds: f64,
    pub max_instance_ms: f64,
}

#[derive(Clone, Debug)]
pub struct DifftestOutcome {
    pub report: DifftestReport,
    pub records: Vec<InstanceRecord>,
    pub findings: Vec<Finding>,
    pub timing: Timing,
}

pub type Classifier = dyn Fn(&TabularFormula) -> Classification + Sync;

/// The production classifier with default settings.
pub fn default_classifier(f: &TabularFormula) -> Classification {
    classify_with(f, &ClassifyConfig::default())
}

struct Timed {
    record: InstanceRecord,
    finding: Option<Finding>,
    classify_s: f64,
    oracle_s: f64,
}

fn oracle_label(sat: bool) -> &'static str {
    if sat {
        "sat"
    } else {
        "unsat"
    }
}

fn run_instance(params: &DifftestParams, index: usize, classifier: &Classifier) -> Timed {
    let gp = params.instance(index);
    let f = generate(&gp).expect("validated parameters");
    let t0 = Instant::now();
    let c = classifier(&f);
    let classify_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let oracle = dpll(&f);
    let oracle_s = t1.elapsed().as_secs_f64();
    let cross_checked = f.num_vars() <= CROSS_CHECK_BOUND;
    let oracle_mismatch = cross_checked && brute_force(&f).map(|b| b.satisfiable) != Ok(oracle.satisfiable);
    let soundness_violation = match &c.verdict {
        Verdict::Satisfiable { witness } => !f.evaluate(witness).unwrap_or(false),
        _ => false,
    };
    let agree = match &c.verdict {
        Verdict::Satisfiable { .. } => oracle.satisfiable && !soundness_violation,
        Verdict::Unsatisfiable { .. } => !oracle.satisfiable,
        Verdict::ClassificationFailure { .. } => false,
    };
    let kind = if soundness_violation {
        Some(FindingKind::SoundnessViolation)
    } else if matches!(c.verdict, Verdict::ClassificationFailure { .. }) {
        Some(FindingKind::ClassificationFailure)
    } else if !agree {
        Some(FindingKind::Disagreement)
    } else {
        None
    };
    let finding = kind.map(|kind| {
        let label = c.verdict.label();
        let osat = oracle.satisfiable;
        let pred = |g: &TabularFormula| classifier(g).verdict.label() == label && dpll(g).satisfiable == osat;
        let (minimized, minimize_error, minimized_verdict) = match minimize(&f, &pred) {
            Ok(m) => {
                let v = classifier(&m.formula).verdict;
                (Some(m.formula.to_dimacs()), None, Some(v))
            }
            Err(e) => (None, Some(e.to_string()), None),
        };
        Finding {
            index,
            kind,
            seed: params.seed.wrapping_add(index as u64),
            params: gp.clone(),
            original: f.to_dimacs(),
            minimized,
            minimize_error,
            verdict: c.verdict.clone(),
            oracle: oracle.clone(),
            minimized_verdict,
            stats: c.stats.clone(),
        }
    });
    let stage = match &c.verdict {
        Verdict::Unsatisfiable { stage, .. } => Some(stage.to_string()),
        _ => None,
    };
    Timed {
        record: InstanceRecord {
            index,
            seed: params.seed.wrapping_add(index as u64),
            params: gp,
            verdict: c.verdict.label().into(),
            oracle_sat: oracle.satisfiable,
            agree,
            soundness_violation,
            oracle_mismatch,
            cross_checked,
            stage,
            early_tier: c.stats.early_tier,
            k: c.stats.k,
            backtracks: c.stats.backtracks,
            restarts: c.stats.restarts,
        },
        finding,
        classify_s,
        oracle_s,
    }
}

/// Runs the production classifier. `jobs == 0` uses all cores.
pub fn difftest(params: &DifftestParams, jobs: usize) -> Result<DifftestOutcome, DifftestError> {
    difftest_with(params, jobs, &default_classifier)
}

/// Runs an arbitrary classifier, e.g. one with an injected bug.
pub fn difftest_with(
    params: &DifftestParams,
    jobs: usize,
    classifier: &Classifier,
) -> Result<DifftestOutcome, DifftestError> {
    params.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| DifftestError::Pool(e.to_string()))?;
    let start = Instant::now();
    let results: Vec<Timed> = pool.install(|| {
        (0..params.count)
            .into_par_iter()
            .map(|i| run_instance(params, i, classifier))
            .collect()
    });
    let total_seconds = start.elapsed().as_secs_f64();

    let mut report = DifftestReport {
        version: env!("CARGO_PKG_VERSION").into(),
        rng: RNG_ALGORITHM.into(),
        seed_policy: "instance i is drawn from seed + i (wrapping u64)".into(),
        params: params.clone(),
        instances: params.count,
        matrix: BTreeMap::new(),
        agreements: 0,
        disagreements: 0,
        soundness_violations: 0,
        classification_failures: 0,
        oracle_cross_checks: 0,
        oracle_mismatches: 0,
        unsat_by_stage: BTreeMap::new(),
        early_witnesses: 0,
        backtracks_total: 0,
        backtracks_max: 0,
        restarts_total: 0,
        k_max: 0,
        findings: Vec::new(),
    };
    let mut records = Vec::with_capacity(results.len());
    let mut findings = Vec::new();
    let mut timing = Timing {
        jobs: pool.current_num_threads(),
        total_seconds,
        classify_seconds: 0.0,
        oracle_seconds: 0.0,
        max_instance_ms: 0.0,
    };
    for t in results {
        let r = &t.record;
        *report
            .matrix
            .entry(r.verdict.clone())
            .or_default()
            .entry(oracle_label(r.oracle_sat).into())
            .or_default() += 1;
        if r.agree {
            report.agreements += 1;
        } else if r.verdict != "failure" {
            report.disagreements += 1;
        }
        report.soundness_violations += usize::from(r.soundness_violation);
        report.classification_failures += usize::from(r.verdict == "failure");
        report.oracle_cross_checks += usize::from(r.cross_checked);
        report.oracle_mismatches += usize::from(r.oracle_mismatch);
        if let Some(s) = &r.stage {
            *report.unsat_by_stage.entry(s.clone()).or_default() += 1;
        }
        report.early_witnesses += usize::from(r.early_tier.is_some());
        report.backtracks_total += r.backtracks;
        report.backtracks_max = report.backtracks_max.max(r.backtracks);
        report.restarts_total += r.restarts;
        report.k_max = report.k_max.max(r.k);
        timing.classify_seconds += t.classify_s;
        timing.oracle_seconds += t.oracle_s;
        timing.max_instance_ms = timing.max_instance_ms.max((t.classify_s + t.oracle_s) * 1e3);
        if let Some(f) = t.finding {
            report.findings.push(FindingSummary {
                index: f.index,
                kind: f.kind,
                seed: f.seed,
                dir: format!("findings/{}", f.dir_name()),
                n: f.params.n,
                m: f.params.m,
                minimized_clauses: f
                    .minimized
                    .as_deref()
                    .and_then(|d| crate::formula::parse_dimacs(d).ok())
                    .map(|g| g.num_clauses()),
            });
            findings.push(f);
        }
        records.push(t.record);
    }
    log::info!(
        "difftest: {} instances, {} agreements, {} findings in {:.1}s",
        report.instances,
        report.agreements,
        findings.len(),
        total_seconds
    );
    Ok(DifftestOutcome {
        report,
        records,
        findings,
        timing,
    })
}

/// Writes `report.json`, `timing.json` and one directory per finding.
pub fn write_outputs(out: &Path, outcome: &DifftestOutcome) -> Result<(), DifftestError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), pretty(&outcome.report))?;
    fs::write(out.join("timing.json"), pretty(&outcome.timing))?;
    for f in &outcome.findings {
        let dir = out.join("findings").join(f.dir_name());
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("original.cnf"), &f.original)?;
        if let Some(m) = &f.minimized {
            fs::write(dir.join("minimized.cnf"), m)?;
        }
        let verdicts = serde_json::json!({
            "classifier": f.verdict,
            "classifier_text": f.verdict.to_string(),
            "oracle": f.oracle,
            "minimized_classifier": f.minimized_verdict,
            "minimize_error": f.minimize_error,
        });
        fs::write(dir.join("verdicts.json"), pretty(&verdicts))?;
        let diagnostics = serde_json::json!({
            "kind": f.kind,
            "stats": f.stats,
            "diagnostics": match &f.verdict {
                Verdict::ClassificationFailure { diagnostics } => Some(diagnostics),
                _ => None,
            },
        });
        fs::write(dir.join("diagnostics.json"), pretty(&diagnostics))?;
        fs::write(
            dir.join("seed.txt"),
            format!(
                "instance {}\ninstance_seed {}\ngenerator_seed {}\nn {}\nm {}\nmode {:?}\nnegation_fraction {}\n",
                f.index, f.seed, f.params.seed, f.params.n, f.params.m, f.params.mode, f.params.negation_fraction
            ),
        )?;
    }
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}
