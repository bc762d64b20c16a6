//! Mixed binary/continuous linear programs (always minimized), an
//! embedded branch-and-bound solver, and MPS / LP text formats.

mod lp_format;
mod mps;
mod presolve;
mod solve;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lp_format::{export_lp, export_lp_with_names, parse_lp};
pub use mps::{export_mps, export_mps_with_names, parse_mps};
pub use presolve::{presolve, Infeasible, Presolved};
pub use solve::{solve, solve_lp, solve_with_priorities, Limits, MilpSolution, SolveError, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Binary,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub sense: RowSense,
    pub rhs: f64,
    /// Sorted by column, no duplicates, no zeros.
    pub coefficients: Vec<(ColId, f64)>,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(c, a)| a * values[c.0]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.sense {
            RowSense::Le => (act - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - act).max(0.0),
            RowSense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    /// Constant added to the objective.
    pub objective_offset: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("column {0:?}: {1}")]
    BadColumn(String, String),
    #[error("row {0:?}: {1}")]
    BadRow(String, String),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("objective offset must be finite")]
    BadOffset,
}

impl MilpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        MilpProblem { name: name.into(), ..Default::default() }
    }

    pub fn add_column(&mut self, name: impl Into<String>, kind: ColumnKind, lower: f64, upper: f64, objective: f64) -> ColId {
        self.columns.push(Column { name: name.into(), kind, lower, upper, objective });
        ColId(self.columns.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> ColId {
        self.add_column(name, ColumnKind::Binary, 0.0, 1.0, objective)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> ColId {
        self.add_column(name, ColumnKind::Continuous, lower, upper, objective)
    }

    /// Adds a row; repeated columns are summed and zero terms dropped.
    pub fn add_row(&mut self, name: impl Into<String>, sense: RowSense, rhs: f64, terms: impl IntoIterator<Item = (ColId, f64)>) -> RowId {
        let mut coefficients: Vec<(ColId, f64)> = terms.into_iter().collect();
        coefficients.sort_by_key(|t| t.0);
        let mut merged: Vec<(ColId, f64)> = Vec::with_capacity(coefficients.len());
        for (c, a) in coefficients {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += a,
                _ => merged.push((c, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.rows.push(Row { name: name.into(), sense, rhs, coefficients: merged });
        RowId(self.rows.len() - 1)
    }

    pub fn fix(&mut self, c: ColId, value: f64) {
        self.columns[c.0].lower = value;
        self.columns[c.0].upper = value;
    }

    pub fn binary_count(&self) -> usize {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset + self.columns.iter().zip(values).map(|(c, v)| c.objective * v).sum::<f64>()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self.columns.iter().zip(values).map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0)).fold(0.0, f64::max);
        self.rows.iter().map(|r| r.violation(values)).fold(bounds, f64::max)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if !self.objective_offset.is_finite() {
            return Err(ProblemError::BadOffset);
        }
        let mut names = BTreeSet::new();
        for c in &self.columns {
            let bad = |msg: &str| Err(ProblemError::BadColumn(c.name.clone(), msg.to_string()));
            if c.name.is_empty() {
                return bad("empty name");
            }
            if !names.insert(c.name.as_str()) {
                return Err(ProblemError::DuplicateName(c.name.clone()));
            }
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return bad("invalid bounds");
            }
            if c.lower == f64::INFINITY || c.upper == f64::NEG_INFINITY {
                return bad("invalid bounds");
            }
            if !c.objective.is_finite() {
                return bad("objective coefficient must be finite");
            }
            if c.kind == ColumnKind::Binary && !([0.0, 1.0].contains(&c.lower) && [0.0, 1.0].contains(&c.upper)) {
                return bad("binary bounds must be 0 or 1");
            }
        }
        let mut row_names = BTreeSet::new();
        for r in &self.rows {
            let bad = |msg: &str| Err(ProblemError::BadRow(r.name.clone(), msg.to_string()));
            if r.name.is_empty() {
                return bad("empty name");
            }
            if !row_names.insert(r.name.as_str()) {
                return Err(ProblemError::DuplicateName(r.name.clone()));
            }
            if !r.rhs.is_finite() {
                return bad("rhs must be finite");
            }
            let mut prev = None;
            for &(c, a) in &r.coefficients {
                if c.0 >= self.columns.len() {
                    return bad("references a missing column");
                }
                if !a.is_finite() || a == 0.0 {
                    return bad("coefficients must be finite and non-zero");
                }
                if prev.is_some_and(|p| p >= c) {
                    return bad("coefficients must be sorted by column without repeats");
                }
                prev = Some(c);
            }
        }
        Ok(())
    }

    pub fn column_by_name(&self, name: &str) -> Option<ColId> {
        self.columns.iter().position(|c| c.name == name).map(ColId)
    }
}

/// Failure to read or write a text format.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("name {0:?} does not fit the format; export with a name map instead")]
    NameTooLong(String),
    #[error(transparent)]
    Invalid(#[from] ProblemError),
}

pub(crate) fn syntax<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Syntax { line, message: message.into() })
}

/// Mangled copy of `p` plus the map back, or `None` when no name needs it.
pub(crate) fn mangle_if(p: &MilpProblem, needs: impl Fn(&str, bool) -> bool) -> Option<(MilpProblem, NameMap)> {
    let any = p.columns.iter().any(|c| needs(&c.name, true)) || p.rows.iter().any(|r| needs(&r.name, false));
    if !any {
        return None;
    }
    let mut q = p.clone();
    let mut map = NameMap::default();
    for (i, c) in q.columns.iter_mut().enumerate() {
        let new = mangled('C', i);
        map.columns.push((new.clone(), std::mem::replace(&mut c.name, new)));
    }
    for (i, r) in q.rows.iter_mut().enumerate() {
        let new = mangled('R', i);
        map.rows.push((new.clone(), std::mem::replace(&mut r.name, new)));
    }
    Some((q, map))
}

/// Original names for problems whose names were replaced on export.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NameMap {
    /// `(exported, original)` pairs in column order.
    pub columns: Vec<(String, String)>,
    /// `(exported, original)` pairs in row order.
    pub rows: Vec<(String, String)>,
}

impl NameMap {
    /// Puts the original names back on a re-parsed problem.
    pub fn restore(&self, p: &mut MilpProblem) -> Result<(), ProblemError> {
        rename(&mut p.columns.iter_mut().map(|c| &mut c.name).collect::<Vec<_>>(), &self.columns)?;
        rename(&mut p.rows.iter_mut().map(|r| &mut r.name).collect::<Vec<_>>(), &self.rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("name maps always serialize")
    }
}

fn rename(names: &mut [&mut String], pairs: &[(String, String)]) -> Result<(), ProblemError> {
    if pairs.is_empty() {
        return Ok(());
    }
    if names.len() != pairs.len() {
        return Err(ProblemError::BadColumn(String::new(), "name map does not match the problem".into()));
    }
    for (name, (exported, original)) in names.iter_mut().zip(pairs) {
        if **name != *exported {
            return Err(ProblemError::DuplicateName(exported.clone()));
        }
        **name = original.clone();
    }
    Ok(())
}

/// Fixed-width replacement names `P0000001`, `P0000002`, ...
pub(crate) fn mangled(prefix: char, i: usize) -> String {
    format!("{prefix}{:07}", i + 1)
}

/// Shortest text that parses back to exactly `x`.
pub(crate) fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        return "1e30".into();
    }
    if x == f64::NEG_INFINITY {
        return "-1e30".into();
    }
    let plain = format!("{x}");
    let exp = format!("{x:e}");
    if plain.len() <= exp.len() {
        plain
    } else {
        exp
    }
}
