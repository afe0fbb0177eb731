//! Tabular 3-CNF formulas.
//!
//! A clause is stored as three `(variable, mark)` entries where mark 0 is a
//! positive occurrence and mark 1 a negated one. Read as a 0/1 line, a clause
//! is exactly the partial assignment that falsifies it.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the generator behind [`generate`], recorded in difftest reports.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seeded via seed_from_u64";

/// 1-based variable index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(u32);

impl VarId {
    /// # Panics
    ///
    /// If `index` is zero.
    pub fn new(index: u32) -> VarId {
        assert!(index >= 1, "variable indices start at 1");
        VarId(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based offset, convenient for indexing vectors.
    pub fn offset(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_offset(offset: usize) -> VarId {
        VarId(offset as u32 + 1)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Errors raised when building formulas or assignments.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("a clause must mention 3 distinct variables, {0} is repeated")]
    RepeatedVariable(VarId),
    #[error("variable {var} is out of range for n = {n}")]
    VariableOutOfRange { var: u32, n: usize },
    #[error("formulas need at least 3 variables, got {0}")]
    TooFewVariables(usize),
    #[error("assignment has length {got}, formula has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("assignment string may only contain '0' and '1'")]
    BadAssignmentString,
}

/// Three literals over distinct variables, sorted by variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clause {
    entries: [(VarId, bool); 3],
}

impl Clause {
    /// Builds a clause from `(variable, mark)` pairs; `mark == true` means negated.
    pub fn new(entries: [(VarId, bool); 3]) -> Result<Clause, FormulaError> {
        let mut entries = entries;
        entries.sort_by_key(|e| e.0);
        if entries[0].0 == entries[1].0 {
            return Err(FormulaError::RepeatedVariable(entries[0].0));
        }
        if entries[1].0 == entries[2].0 {
            return Err(FormulaError::RepeatedVariable(entries[1].0));
        }
        Ok(Clause { entries })
    }

    /// Builds a clause from DIMACS-style signed literals.
    pub fn from_literals(lits: [i32; 3]) -> Result<Clause, FormulaError> {
        let mut entries = [(VarId(1), false); 3];
        for (slot, &lit) in entries.iter_mut().zip(&lits) {
            if lit == 0 {
                return Err(FormulaError::VariableOutOfRange { var: 0, n: 0 });
            }
            *slot = (VarId(lit.unsigned_abs()), lit < 0);
        }
        Clause::new(entries)
    }

    pub fn entries(&self) -> &[(VarId, bool); 3] {
        &self.entries
    }

    pub fn vars(&self) -> [VarId; 3] {
        [self.entries[0].0, self.entries[1].0, self.entries[2].0]
    }

    pub fn mark_of(&self, var: VarId) -> Option<bool> {
        self.entries.iter().find(|e| e.0 == var).map(|e| e.1)
    }

    /// Signed DIMACS literals in variable order.
    pub fn literals(&self) -> [i32; 3] {
        self.entries
            .map(|(v, neg)| if neg { -(v.0 as i32) } else { v.0 as i32 })
    }

    /// True when the assignment matches the clause line entry-wise.
    pub fn falsified_by(&self, assignment: &Assignment) -> bool {
        self.entries
            .iter()
            .all(|&(v, mark)| assignment.get(v) == mark)
    }
}

/// A truth assignment indexed by [`VarId`]; `true` is the value 1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Assignment {
        Assignment { bits }
    }

    pub fn zeros(n: usize) -> Assignment {
        Assignment {
            bits: vec![false; n],
        }
    }

    /// Parses a `0`/`1` string in natural variable order (`"01101"`).
    pub fn from_bits_str(s: &str) -> Result<Assignment, FormulaError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(FormulaError::BadAssignmentString),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Assignment::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, var: VarId) -> bool {
        self.bits[var.offset()]
    }

    pub fn set(&mut self, var: VarId, value: bool) {
        self.bits[var.offset()] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A 3-CNF formula over variables `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TabularFormula {
    n: usize,
    clauses: Vec<Clause>,
}

impl TabularFormula {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<TabularFormula, FormulaError> {
        if n < 3 {
            return Err(FormulaError::TooFewVariables(n));
        }
        for c in &clauses {
            for v in c.vars() {
                if v.offset() >= n {
                    return Err(FormulaError::VariableOutOfRange { var: v.0, n });
                }
            }
        }
        Ok(TabularFormula { n, clauses })
    }

    /// Convenience constructor from signed literal triples.
    pub fn from_literals(n: usize, clauses: &[[i32; 3]]) -> Result<TabularFormula, FormulaError> {
        let clauses = clauses
            .iter()
            .map(|&l| Clause::from_literals(l))
            .collect::<Result<Vec<_>, _>>()?;
        TabularFormula::new(n, clauses)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// 1 iff no clause line is contained in the assignment.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, FormulaError> {
        if assignment.len() != self.n {
            return Err(FormulaError::LengthMismatch {
                expected: self.n,
                got: assignment.len(),
            });
        }
        Ok(!self.clauses.iter().any(|c| c.falsified_by(assignment)))
    }

    /// Removes duplicate clauses and sorts the rest.
    pub fn canonicalize(&self) -> TabularFormula {
        let mut clauses = self.clauses.clone();
        clauses.sort();
        clauses.dedup();
        TabularFormula { n: self.n, clauses }
    }

    /// Same variable count, different clauses.
    pub fn with_clauses(&self, clauses: Vec<Clause>) -> TabularFormula {
        TabularFormula { n: self.n, clauses }
    }

    /// Renumbers variables so that only those mentioned by some clause remain,
    /// preserving their relative order. The variable count never drops below 3.
    pub fn compact_variables(&self) -> TabularFormula {
        let mut used = vec![false; self.n];
        for c in &self.clauses {
            for v in c.vars() {
                used[v.offset()] = true;
            }
        }
        let mut remap = vec![0u32; self.n];
        let mut next = 0u32;
        for (i, &u) in used.iter().enumerate() {
            if u {
                next += 1;
                remap[i] = next;
            }
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause {
                entries: c.entries.map(|(v, m)| (VarId(remap[v.offset()]), m)),
            })
            .collect();
        TabularFormula {
            n: (next as usize).max(3),
            clauses,
        }
    }

    /// Serializes to DIMACS CNF.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            let [a, b, d] = c.literals();
            out.push_str(&format!("{a} {b} {d} 0\n"));
        }
        out
    }
}

/// Location-carrying DIMACS parse failure.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("clause has {0} literals, expected exactly 3")]
    WrongClauseWidth(usize),
    #[error("variable {0} repeated within a clause")]
    RepeatedVariable(u32),
    #[error("variable {var} out of range 1..={n}")]
    VariableOutOfRange { var: u32, n: usize },
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCount { declared: usize, found: usize },
    #[error("formulas need at least 3 variables, header declares {0}")]
    TooFewVariables(usize),
}

/// Parses DIMACS CNF where every clause has exactly three literals over
/// distinct variables.
pub fn parse_dimacs(text: &str) -> Result<TabularFormula, ParseError> {
    let err = |line: usize, column: usize, kind| ParseError { line, column, kind };
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<(i32, usize, usize)> = Vec::new();
    let mut last_pos = (1, 1);

    'lines: for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let trimmed = line.trim_start();
        if trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            let col = line.len() - trimmed.len() + 1;
            if header.is_some() {
                return Err(err(line_no, col, ParseErrorKind::Syntax("duplicate header".into())));
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::Syntax("expected `p cnf <vars> <clauses>`".into()),
                ));
            }
            let parse_num = |s: &str| {
                s.parse::<usize>().map_err(|_| {
                    err(line_no, col, ParseErrorKind::Syntax(format!("bad header number `{s}`")))
                })
            };
            let n = parse_num(parts[2])?;
            let m = parse_num(parts[3])?;
            if n < 3 {
                return Err(err(line_no, col, ParseErrorKind::TooFewVariables(n)));
            }
            header = Some((n, m));
            continue;
        }
        let mut offset = 0;
        for token in line.split_whitespace() {
            let start = line[offset..].find(token).map(|p| p + offset).unwrap_or(offset);
            offset = start + token.len();
            let column = start + 1;
            last_pos = (line_no, column);
            let Some((n, _)) = header else {
                return Err(err(line_no, column, ParseErrorKind::MissingHeader));
            };
            if token == "%" {
                break 'lines;
            }
            let lit: i32 = token.parse().map_err(|_| {
                err(line_no, column, ParseErrorKind::Syntax(format!("unexpected token `{token}`")))
            })?;
            if lit == 0 {
                let (_, cl, cc) = current.first().copied().unwrap_or((0, line_no, column));
                if current.len() != 3 {
                    return Err(err(cl, cc, ParseErrorKind::WrongClauseWidth(current.len())));
                }
                let mut entries = [(VarId(1), false); 3];
                for (slot, &(l, ln, lc)) in entries.iter_mut().zip(&current) {
                    let var = l.unsigned_abs();
                    if var as usize > n {
                        return Err(err(ln, lc, ParseErrorKind::VariableOutOfRange { var, n }));
                    }
                    *slot = (VarId(var), l < 0);
                }
                let clause = Clause::new(entries).map_err(|e| match e {
                    FormulaError::RepeatedVariable(v) => {
                        err(cl, cc, ParseErrorKind::RepeatedVariable(v.0))
                    }
                    other => err(cl, cc, ParseErrorKind::Syntax(other.to_string())),
                })?;
                clauses.push(clause);
                current.clear();
            } else {
                current.push((lit, line_no, column));
            }
        }
    }
    let Some((n, m)) = header else {
        return Err(err(1, 1, ParseErrorKind::MissingHeader));
    };
    if !current.is_empty() {
        return Err(err(
            last_pos.0,
            last_pos.1,
            ParseErrorKind::Syntax("last clause is not terminated by 0".into()),
        ));
    }
    if clauses.len() != m {
        return Err(err(
            last_pos.0,
            last_pos.1,
            ParseErrorKind::ClauseCount {
                declared: m,
                found: clauses.len(),
            },
        ));
    }
    Ok(TabularFormula { n, clauses })
}

/// How [`generate`] shapes the instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenMode {
    Free,
    PlantedSat,
    PlantedUnsat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub negation_fraction: f64,
    pub mode: GenMode,
    pub seed: u64,
}

impl GenParams {
    pub fn validate(&self) -> Result<(), FormulaError> {
        if self.n < 3 {
            return Err(FormulaError::TooFewVariables(self.n));
        }
        if self.m < 1 {
            return Err(FormulaError::InvalidParams("m must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.negation_fraction) {
            return Err(FormulaError::InvalidParams(format!(
                "negation fraction {} outside [0, 1]",
                self.negation_fraction
            )));
        }
        Ok(())
    }
}

fn random_clause(rng: &mut ChaCha8Rng, n: usize, neg: f64) -> Clause {
    let idx = sample(rng, n, 3);
    let mut entries = [(VarId(1), false); 3];
    for (slot, i) in entries.iter_mut().zip(idx.iter()) {
        *slot = (VarId::from_offset(i), rng.random_bool(neg));
    }
    Clause::new(entries).expect("sampled variables are distinct")
}

/// Draws a random instance; the output is a pure function of `params`.
///
/// `PlantedUnsat` always contains all eight sign patterns over one random
/// variable triple, so it yields `max(m, 8)` clauses.
pub fn generate(params: &GenParams) -> Result<TabularFormula, FormulaError> {
    generate_with_witness(params).map(|(f, _)| f)
}

/// Like [`generate`], also returning the hidden assignment for `PlantedSat`.
pub fn generate_with_witness(
    params: &GenParams,
) -> Result<(TabularFormula, Option<Assignment>), FormulaError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (n, m, neg) = (params.n, params.m, params.negation_fraction);
    match params.mode {
        GenMode::Free => {
            let clauses = (0..m).map(|_| random_clause(&mut rng, n, neg)).collect();
            Ok((TabularFormula { n, clauses }, None))
        }
        GenMode::PlantedSat => {
            let hidden = Assignment::new((0..n).map(|_| rng.random_bool(0.5)).collect());
            let mut clauses = Vec::with_capacity(m);
            while clauses.len() < m {
                let c = random_clause(&mut rng, n, neg);
                if !c.falsified_by(&hidden) {
                    clauses.push(c);
                }
            }
            Ok((TabularFormula { n, clauses }, Some(hidden)))
        }
        GenMode::PlantedUnsat => {
            let core = sample(&mut rng, n, 3);
            let core: Vec<VarId> = core.iter().map(VarId::from_offset).collect();
            let mut clauses: Vec<Clause> = (0..8u8)
                .map(|p| {
                    Clause::new([
                        (core[0], p & 4 != 0),
                        (core[1], p & 2 != 0),
                        (core[2], p & 1 != 0),
                    ])
                    .expect("core variables are distinct")
                })
                .collect();
            for _ in 8..m {
                clauses.push(random_clause(&mut rng, n, neg));
            }
            for i in (1..clauses.len()).rev() {
                let j = rng.random_range(0..=i);
                clauses.swap(i, j);
            }
            Ok((TabularFormula { n, clauses }, None))
        }
    }
}

/// Renders the formula as the 0/1 line table, one clause per row.
pub fn render_table(f: &TabularFormula, names: &[String]) -> String {
    let width = names.iter().map(|s| s.len()).max().unwrap_or(1);
    let mut out = String::new();
    let header: Vec<String> = names.iter().map(|s| format!("{s:>width$}")).collect();
    out.push_str(header.join(" ").trim_end());
    out.push('\n');
    for c in &f.clauses {
        let mut cells = vec![" ".repeat(width); f.n];
        for &(v, m) in c.entries() {
            cells[v.offset()] = format!("{:>width$}", u8::from(m));
        }
        out.push_str(cells.join(" ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample5() -> TabularFormula {
        parse_dimacs("p cnf 5 3\n-1 2 -4 0\n2 3 -5 0\n-3 -4 5 0\n").unwrap()
    }

    #[test]
    fn parses_sample5_formula() {
        let f = sample5();
        assert_eq!(f.num_vars(), 5);
        let lines: Vec<_> = f.clauses().iter().map(|c| *c.entries()).collect();
        let v = VarId::new;
        assert_eq!(lines[0], [(v(1), true), (v(2), false), (v(4), true)]);
        assert_eq!(lines[1], [(v(2), false), (v(3), false), (v(5), true)]);
        assert_eq!(lines[2], [(v(3), true), (v(4), true), (v(5), false)]);
    }

    #[test]
    fn smallest_instance() {
        let f = parse_dimacs("p cnf 3 1\n1 2 3 0\n").unwrap();
        assert_eq!(f.num_clauses(), 1);
        assert!(f.clauses()[0].entries().iter().all(|e| !e.1));
    }

    #[test]
    fn rejects_repeated_variable() {
        let e = parse_dimacs("p cnf 3 1\n1 1 2 0\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::RepeatedVariable(1));
        assert_eq!((e.line, e.column), (2, 1));
    }

    #[test]
    fn parse_error_paths() {
        let e = parse_dimacs("p cnf 3 1\n1 2 0\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::WrongClauseWidth(2));
        let e = parse_dimacs("p cnf 3 1\n1 2 4 0\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::VariableOutOfRange { var: 4, n: 3 });
        assert_eq!((e.line, e.column), (2, 5));
        let e = parse_dimacs("p cnf 3 1\n1 x 3 0\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!((e.line, e.column), (2, 3));
        let e = parse_dimacs("1 2 3 0\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingHeader);
        let e = parse_dimacs("p cnf 3 2\n1 2 3 0\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ClauseCount { .. }));
        let e = parse_dimacs("p cnf 2 0\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::TooFewVariables(2));
    }

    #[test]
    fn comments_and_multiline_clauses() {
        let f = parse_dimacs("c hello\np cnf 4 2\n1 -2\n 3 0 -4 2 1 0\n%\n0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.clauses()[1].literals(), [1, 2, -4]);
    }

    #[test]
    fn evaluate_examples() {
        let f = sample5();
        assert!(f.evaluate(&Assignment::zeros(5)).unwrap());
        // Matching clause 1 entry-wise: x1=1, x2=0, x4=1.
        let a = Assignment::from_bits_str("10010").unwrap();
        assert!(!f.evaluate(&a).unwrap());
        assert!(matches!(
            f.evaluate(&Assignment::zeros(4)),
            Err(FormulaError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn canonicalize_dedups_and_is_idempotent() {
        let f = TabularFormula::from_literals(4, &[[1, 2, 3], [-4, 2, 1], [1, 2, 3]]).unwrap();
        let c = f.canonicalize();
        assert_eq!(c.num_clauses(), 2);
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn generate_is_deterministic() {
        let p = GenParams {
            n: 20,
            m: 91,
            negation_fraction: 0.5,
            mode: GenMode::Free,
            seed: 42,
        };
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        assert_eq!(generate(&p).unwrap().num_clauses(), 91);
    }

    #[test]
    fn planted_modes() {
        for seed in 0..20 {
            let p = GenParams {
                n: 9,
                m: 30,
                negation_fraction: 0.4,
                mode: GenMode::PlantedSat,
                seed,
            };
            let (f, hidden) = generate_with_witness(&p).unwrap();
            assert!(f.evaluate(&hidden.unwrap()).unwrap());

            let p = GenParams {
                mode: GenMode::PlantedUnsat,
                ..p
            };
            let f = generate(&p).unwrap();
            for bits in 0u32..(1 << 9) {
                let a = Assignment::new((0..9).map(|i| bits >> i & 1 == 1).collect());
                assert!(!f.evaluate(&a).unwrap());
            }
        }
        let tiny = GenParams {
            n: 5,
            m: 3,
            negation_fraction: 0.5,
            mode: GenMode::PlantedUnsat,
            seed: 1,
        };
        assert_eq!(generate(&tiny).unwrap().num_clauses(), 8);
    }

    #[test]
    fn invalid_params() {
        let p = GenParams {
            n: 2,
            m: 3,
            negation_fraction: 0.5,
            mode: GenMode::Free,
            seed: 1,
        };
        assert!(generate(&p).is_err());
        let p = GenParams { n: 5, m: 0, ..p };
        assert!(generate(&p).is_err());
        let p = GenParams {
            m: 2,
            negation_fraction: 1.5,
            ..p
        };
        assert!(generate(&p).is_err());
    }

    #[test]
    fn compact_variables_renumbers() {
        let f = TabularFormula::from_literals(9, &[[2, -5, 9], [5, 7, -9]]).unwrap();
        let c = f.compact_variables();
        assert_eq!(c.num_vars(), 4);
        assert_eq!(c.clauses()[0].literals(), [1, -2, 4]);
        assert_eq!(c.clauses()[1].literals(), [2, 3, -4]);
    }
}
