//! Python bindings: formulas, compact-triplet structures, the classifier and
//! the oracles.

use std::path::Path;
use std::sync::Arc;

use ctsat::cts::{default_names, Cts, Permutation, Tier};
use ctsat::decompose::{ctf_to_cts, decompose as split, Ctf, Strategy};
use ctsat::formula::{generate as gen, Assignment, Clause, GenMode, GenParams, TabularFormula};
use ctsat::oracle::difftest::{difftest as run_difftest, parse_range, write_outputs, ClauseRange, DifftestParams};
use ctsat::oracle::{brute_force, dpll};
use ctsat::sep::{classify_with, ClassifyConfig, Verdict};
use ctsat::unify::{unify as unify_system, StructureSystem, UnifyOutcome};
use ctsat::VarId;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn strategy(name: &str) -> PyResult<Strategy> {
    match name {
        "assemble" => Ok(Strategy::Assemble),
        "simple" => Ok(Strategy::Simple),
        other => Err(value_err(format!("unknown strategy {other:?}"))),
    }
}

fn mode(name: &str) -> PyResult<GenMode> {
    match name {
        "free" => Ok(GenMode::Free),
        "sat" => Ok(GenMode::PlantedSat),
        "unsat" => Ok(GenMode::PlantedUnsat),
        other => Err(value_err(format!("unknown mode {other:?}"))),
    }
}

fn assignment(bits: &str) -> PyResult<Assignment> {
    Assignment::from_bits_str(bits).map_err(value_err)
}

/// A 3-CNF formula over variables 1..=num_vars.
#[pyclass(name = "Formula", module = "pyctsat", frozen)]
pub struct PyFormula {
    inner: TabularFormula,
}

#[pymethods]
impl PyFormula {
    #[new]
    fn new(num_vars: usize, clauses: Vec<[i32; 3]>) -> PyResult<Self> {
        let inner = TabularFormula::from_literals(num_vars, &clauses).map_err(value_err)?;
        Ok(PyFormula { inner })
    }

    #[staticmethod]
    fn from_dimacs(text: &str) -> PyResult<Self> {
        let inner = ctsat::parse_dimacs(text).map_err(value_err)?;
        Ok(PyFormula { inner })
    }

    /// Random formula; `mode` is "free", "sat" or "unsat".
    #[staticmethod]
    #[pyo3(signature = (n, m, negation_fraction = 0.5, mode = "free", seed = 0))]
    fn generate(n: usize, m: usize, negation_fraction: f64, mode: &str, seed: u64) -> PyResult<Self> {
        let params = GenParams {
            n,
            m,
            negation_fraction,
            mode: self::mode(mode)?,
            seed,
        };
        Ok(PyFormula {
            inner: gen(&params).map_err(value_err)?,
        })
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.num_vars()
    }

    #[getter]
    fn num_clauses(&self) -> usize {
        self.inner.num_clauses()
    }

    fn clauses(&self) -> Vec<[i32; 3]> {
        self.inner.clauses().iter().map(Clause::literals).collect()
    }

    /// `bits[i]` is the value of variable `i + 1`.
    fn evaluate(&self, bits: &str) -> PyResult<bool> {
        self.inner.evaluate(&assignment(bits)?).map_err(value_err)
    }

    fn to_dimacs(&self) -> String {
        self.inner.to_dimacs()
    }

    fn __repr__(&self) -> String {
        format!("Formula(num_vars={}, num_clauses={})", self.inner.num_vars(), self.inner.num_clauses())
    }
}

/// A compact-triplet structure. Tiers hold line codes 0..8, first bit most
/// significant.
#[pyclass(name = "Structure", module = "pyctsat", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyCts {
    inner: Cts,
}

fn perm(order: &[u32]) -> PyResult<Arc<Permutation>> {
    Ok(Arc::new(Permutation::from_indices(order).map_err(value_err)?))
}

#[pymethods]
impl PyCts {
    /// Structure of the CT formula with these clauses under `order`.
    #[staticmethod]
    fn from_clauses(order: Vec<u32>, clauses: Vec<[i32; 3]>) -> PyResult<Self> {
        let mut ctf = Ctf::new(perm(&order)?);
        for lits in clauses {
            ctf.add_clause(Clause::from_literals(lits).map_err(value_err)?).map_err(value_err)?;
        }
        Ok(PyCts { inner: ctf_to_cts(&ctf) })
    }

    /// Cleared structure from explicit tiers of line codes.
    #[staticmethod]
    fn from_tiers(order: Vec<u32>, tiers: Vec<Vec<u8>>) -> PyResult<Self> {
        let tiers = tiers.iter().map(|c| Tier::from_codes(c)).collect();
        let inner = Cts::from_tiers(perm(&order)?, tiers).map_err(value_err)?;
        Ok(PyCts { inner })
    }

    #[staticmethod]
    fn from_assignment(order: Vec<u32>, bits: &str) -> PyResult<Self> {
        let inner = Cts::from_assignment(&assignment(bits)?, perm(&order)?).map_err(value_err)?;
        Ok(PyCts { inner })
    }

    fn order(&self) -> Vec<u32> {
        self.inner.perm().order().iter().map(|v| v.index()).collect()
    }

    fn tiers(&self) -> Vec<Vec<u32>> {
        if self.inner.is_empty() {
            return Vec::new();
        }
        let codes = |t: &Tier| t.lines().map(|l| u32::from(l.code())).collect();
        self.inner.tiers().iter().map(codes).collect()
    }

    fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    fn is_elementary(&self) -> bool {
        self.inner.is_elementary()
    }

    fn union(&self, other: &PyCts) -> PyResult<PyCts> {
        let inner = self.inner.union(&other.inner).map_err(value_err)?;
        Ok(PyCts { inner })
    }

    fn intersect(&self, other: &PyCts) -> PyResult<PyCts> {
        let inner = self.inner.intersect(&other.inner).map_err(value_err)?;
        Ok(PyCts { inner })
    }

    fn concretize(&self, var: u32, value: bool) -> PyResult<PyCts> {
        if var == 0 || var as usize > self.inner.num_vars() {
            return Err(value_err(format!("variable {var} out of range")));
        }
        Ok(PyCts {
            inner: self.inner.concretize(VarId::new(var), value),
        })
    }

    fn contains(&self, bits: &str) -> PyResult<bool> {
        self.inner.contains_assignment(&assignment(bits)?).map_err(value_err)
    }

    /// Every encoded assignment as a bit string, natural variable order.
    fn assignments(&self) -> PyResult<Vec<String>> {
        let set = self.inner.enumerate_assignments().map_err(value_err)?;
        Ok(set.iter().map(|a| a.to_string()).collect())
    }

    fn render(&self) -> String {
        self.inner.render(&default_names(self.inner.num_vars()))
    }

    fn __eq__(&self, other: &PyCts) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Structure(order={:?}, lines={})", self.order(), self.inner.line_count())
    }
}

/// Classifier verdict. `tier` is 0-based; `record` is the printed form.
#[pyclass(name = "Verdict", module = "pyctsat", frozen, get_all)]
pub struct PyVerdict {
    kind: String,
    witness: Option<String>,
    stage: Option<String>,
    tier: Option<usize>,
    reason: Option<String>,
    record: String,
    exit_code: i32,
    json: String,
}

#[pymethods]
impl PyVerdict {
    fn __repr__(&self) -> String {
        format!("Verdict({:?})", self.record)
    }
}

impl From<&Verdict> for PyVerdict {
    fn from(v: &Verdict) -> Self {
        let (witness, stage, tier, reason) = match v {
            Verdict::Satisfiable { witness } => (Some(witness.to_string()), None, None, None),
            Verdict::Unsatisfiable { stage, tier } => (None, Some(stage.to_string()), *tier, None),
            Verdict::ClassificationFailure { diagnostics } => (None, None, None, Some(diagnostics.reason.clone())),
        };
        PyVerdict {
            kind: v.label().to_string(),
            witness,
            stage,
            tier,
            reason,
            record: v.to_string(),
            exit_code: v.exit_code(),
            json: serde_json::to_string(v).expect("verdict serializes"),
        }
    }
}

#[pyfunction]
#[pyo3(signature = (formula, strategy = "assemble"))]
fn classify(formula: &PyFormula, strategy: &str) -> PyResult<PyVerdict> {
    let cfg = ClassifyConfig {
        strategy: self::strategy(strategy)?,
        ..Default::default()
    };
    Ok(PyVerdict::from(&classify_with(&formula.inner, &cfg).verdict))
}

/// CT structures of the decomposed formula.
#[pyfunction]
#[pyo3(signature = (formula, strategy = "assemble"))]
fn decompose(formula: &PyFormula, strategy: &str) -> PyResult<Vec<PyCts>> {
    let (ctfs, _) = split(&formula.inner.canonicalize(), self::strategy(strategy)?);
    Ok(ctfs.iter().map(|c| PyCts { inner: ctf_to_cts(c) }).collect())
}

/// Unified structures, or `None` when unification empties the system.
#[pyfunction]
fn unify(structures: Vec<PyCts>) -> Option<Vec<PyCts>> {
    let sys = StructureSystem::new(structures.into_iter().map(|s| s.inner).collect());
    match unify_system(sys) {
        UnifyOutcome::Unified { system, .. } => Some(system.structures.into_iter().map(|inner| PyCts { inner }).collect()),
        UnifyOutcome::Empty { .. } => None,
    }
}

/// Witness from the trusted engine ("dpll" or "brute"), `None` if unsatisfiable.
#[pyfunction]
#[pyo3(signature = (formula, engine = "dpll"))]
fn oracle(formula: &PyFormula, engine: &str) -> PyResult<Option<String>> {
    let r = match engine {
        "dpll" => dpll(&formula.inner),
        "brute" => brute_force(&formula.inner).map_err(value_err)?,
        other => return Err(value_err(format!("unknown engine {other:?}"))),
    };
    Ok(r.witness.map(|w| w.to_string()))
}

#[pyfunction]
fn model_count(formula: &PyFormula) -> PyResult<u64> {
    let r = brute_force(&formula.inner).map_err(value_err)?;
    Ok(r.model_count.unwrap_or(0))
}

/// Runs the differential test and returns `report.json` as a string.
#[pyfunction]
#[pyo3(signature = (n_range = "5..16", m_range = "3n..6n", count = 1000, seed = 0, jobs = 0, out = None))]
fn difftest(n_range: &str, m_range: &str, count: usize, seed: u64, jobs: usize, out: Option<&str>) -> PyResult<String> {
    let (n_min, n_max) = parse_range(n_range).map_err(value_err)?;
    let clauses: ClauseRange = m_range.parse().map_err(value_err)?;
    let params = DifftestParams {
        n_min,
        n_max,
        clauses,
        count,
        seed,
        negation_fraction: 0.5,
        modes: vec![GenMode::Free, GenMode::PlantedSat, GenMode::PlantedUnsat],
    };
    let outcome = run_difftest(&params, jobs).map_err(value_err)?;
    if let Some(dir) = out {
        write_outputs(Path::new(dir), &outcome).map_err(value_err)?;
    }
    Ok(serde_json::to_string_pretty(&outcome.report).expect("report serializes"))
}

#[pymodule]
pub fn pyctsat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormula>()?;
    m.add_class::<PyCts>()?;
    m.add_class::<PyVerdict>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(unify, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(model_count, m)?)?;
    m.add_function(wrap_pyfunction!(difftest, m)?)?;
    Ok(())
}
