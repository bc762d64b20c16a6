//! Bound propagation from singleton and forcing rows, and substitution of
//! fixed columns.

use super::{ColId, ColumnKind, MilpProblem, RowSense};

const TOL: f64 = 1e-9;

/// Reduced problem plus what is needed to map its solutions back.
#[derive(Clone, Debug)]
pub struct Presolved {
    pub problem: MilpProblem,
    /// Original column of every reduced column.
    pub kept: Vec<ColId>,
    /// Value of every original column that was removed.
    pub fixed: Vec<Option<f64>>,
}

impl Presolved {
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (&orig, &v) in self.kept.iter().zip(reduced) {
            out[orig.0] = v;
        }
        out
    }
}

/// Proof that no assignment satisfies the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Infeasible;

struct State {
    lo: Vec<f64>,
    hi: Vec<f64>,
    binary: Vec<bool>,
}

impl State {
    fn fixed(&self, c: usize) -> bool {
        self.lo[c] == self.hi[c]
    }

    fn tighten(&mut self, c: usize, lo: f64, hi: f64) -> Result<bool, Infeasible> {
        let (mut lo, mut hi) = (lo, hi);
        if self.binary[c] {
            lo = (lo - TOL).ceil();
            hi = (hi + TOL).floor();
        }
        let mut changed = false;
        if lo > self.lo[c] + TOL {
            self.lo[c] = lo;
            changed = true;
        }
        if hi < self.hi[c] - TOL {
            self.hi[c] = hi;
            changed = true;
        }
        if self.lo[c] > self.hi[c] + TOL * (1.0 + self.lo[c].abs()) {
            return Err(Infeasible);
        }
        if self.hi[c] - self.lo[c] <= TOL * (1.0 + self.lo[c].abs()) && self.lo[c] != self.hi[c] {
            let v = if self.binary[c] { self.lo[c].round() } else { self.lo[c] };
            self.lo[c] = v;
            self.hi[c] = v;
            changed = true;
        }
        Ok(changed)
    }
}

pub fn presolve(p: &MilpProblem) -> Result<Presolved, Infeasible> {
    let n = p.columns.len();
    let mut st = State {
        lo: p.columns.iter().map(|c| c.lower).collect(),
        hi: p.columns.iter().map(|c| c.upper).collect(),
        binary: p.columns.iter().map(|c| c.kind == ColumnKind::Binary).collect(),
    };
    for c in 0..n {
        if st.lo[c] > st.hi[c] {
            return Err(Infeasible);
        }
    }
    let mut active = vec![true; p.rows.len()];
    loop {
        let mut changed = false;
        for (ri, row) in p.rows.iter().enumerate() {
            if !active[ri] {
                continue;
            }
            let mut rhs = row.rhs;
            let mut free = Vec::new();
            let (mut min_act, mut max_act) = (0.0, 0.0);
            for &(c, a) in &row.coefficients {
                let c = c.0;
                if st.fixed(c) {
                    rhs -= a * st.lo[c];
                    continue;
                }
                free.push((c, a));
                let (l, h) = if a > 0.0 { (a * st.lo[c], a * st.hi[c]) } else { (a * st.hi[c], a * st.lo[c]) };
                min_act += l;
                max_act += h;
            }
            let tol = TOL * (1.0 + rhs.abs());
            let (need_le, need_ge) = match row.sense {
                RowSense::Le => (true, false),
                RowSense::Ge => (false, true),
                RowSense::Eq => (true, true),
            };
            if (need_le && min_act > rhs + tol) || (need_ge && max_act < rhs - tol) {
                return Err(Infeasible);
            }
            if free.is_empty() {
                active[ri] = false;
                changed = true;
                continue;
            }
            if free.len() == 1 {
                let (c, a) = free[0];
                let v = rhs / a;
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                // a*x <= rhs bounds x from above when a > 0.
                if need_le {
                    if a > 0.0 {
                        hi = v
                    } else {
                        lo = v
                    }
                }
                if need_ge {
                    if a > 0.0 {
                        lo = lo.max(v)
                    } else {
                        hi = hi.min(v)
                    }
                }
                st.tighten(c, lo, hi)?;
                active[ri] = false;
                changed = true;
                continue;
            }
            let redundant = (!need_le || max_act <= rhs + tol) && (!need_ge || min_act >= rhs - tol);
            if redundant {
                active[ri] = false;
                changed = true;
                continue;
            }
            // Forcing: the row can only hold with every column at one bound.
            let force_min = need_le && min_act.is_finite() && min_act >= rhs - tol;
            let force_max = need_ge && max_act.is_finite() && max_act <= rhs + tol;
            if force_min || force_max {
                for &(c, a) in &free {
                    let at_lo = (a > 0.0) == force_min;
                    let v = if at_lo { st.lo[c] } else { st.hi[c] };
                    st.tighten(c, v, v)?;
                }
                active[ri] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut reduced = MilpProblem::new(p.name.clone());
    let mut kept = Vec::new();
    let mut new_index = vec![usize::MAX; n];
    let mut fixed = vec![None; n];
    let mut offset = p.objective_offset;
    for (c, col) in p.columns.iter().enumerate() {
        if st.fixed(c) {
            fixed[c] = Some(st.lo[c]);
            offset += col.objective * st.lo[c];
        } else {
            new_index[c] = kept.len();
            kept.push(ColId(c));
            reduced.add_column(col.name.clone(), col.kind, st.lo[c], st.hi[c], col.objective);
        }
    }
    reduced.objective_offset = offset;
    for (ri, row) in p.rows.iter().enumerate() {
        if !active[ri] {
            continue;
        }
        let mut rhs = row.rhs;
        let mut terms = Vec::new();
        for &(c, a) in &row.coefficients {
            match fixed[c.0] {
                Some(v) => rhs -= a * v,
                None => terms.push((ColId(new_index[c.0]), a)),
            }
        }
        reduced.add_row(row.name.clone(), row.sense, rhs, terms);
    }
    Ok(Presolved { problem: reduced, kept, fixed })
}
