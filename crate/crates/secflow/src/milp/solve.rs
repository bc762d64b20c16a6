//! Best-first branch-and-bound over binary columns. LP relaxations are
//! solved with `microlp`; child nodes are re-solved from a parent basis by
//! fixing the branching column (dual simplex warm start).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, SolveOutcome, Variable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::presolve::{presolve, Presolved};
use super::{ColId, ColumnKind, MilpProblem, ProblemError, RowSense};

const INT_TOL: f64 = 1e-6;
/// Stand-in for an unlimited time budget.
const FOREVER: Duration = Duration::from_secs(1 << 32);
/// Open nodes that keep their parent's factorized LP; the rest are rebuilt
/// from the root by replaying their fixings.
const WARM_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub time_s: f64,
    /// Relative gap at which the search stops.
    pub gap: f64,
    pub node_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { time_s: 600.0, gap: 1e-4, node_cap: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Incumbent proven optimal within the requested gap.
    Optimal,
    Infeasible,
    /// Node cap reached before the gap closed.
    GapLimit,
    TimeLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::GapLimit => "gap-limit",
            Status::TimeLimit => "time-limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: Status,
    /// One value per column; empty when no feasible point is known.
    pub values: Vec<f64>,
    /// Objective of `values`, `+inf` without an incumbent.
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub nodes: u64,
}

impl MilpSolution {
    pub fn is_feasible(&self) -> bool {
        self.objective.is_finite()
    }

    fn empty(status: Status, bound: f64, nodes: u64) -> Self {
        MilpSolution { status, values: Vec::new(), objective: f64::INFINITY, bound, nodes }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("malformed problem: {0}")]
    MalformedProblem(#[from] ProblemError),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("LP solver failure: {0}")]
    Internal(String),
}

enum Lp {
    Solved(Solution),
    Infeasible,
    OutOfTime,
}

fn outcome(r: Result<SolveOutcome, microlp::Error>) -> Result<Lp, SolveError> {
    match r {
        Ok(SolveOutcome::Solution(s)) => Ok(Lp::Solved(s)),
        Ok(SolveOutcome::Interrupted(_)) => Ok(Lp::OutOfTime),
        Err(microlp::Error::Infeasible) => Ok(Lp::Infeasible),
        Err(microlp::Error::Unbounded) => Err(SolveError::Unbounded),
        Err(e) => Err(SolveError::Internal(e.to_string())),
    }
}

fn to_microlp(p: &MilpProblem, time_limit: Duration) -> (Problem, Vec<Variable>) {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    lp.set_time_limit(time_limit);
    let vars: Vec<Variable> = p.columns.iter().map(|c| lp.add_var(c.objective, (c.lower, c.upper))).collect();
    for row in &p.rows {
        let op = match row.sense {
            RowSense::Le => ComparisonOp::Le,
            RowSense::Eq => ComparisonOp::Eq,
            RowSense::Ge => ComparisonOp::Ge,
        };
        lp.add_constraint(row.coefficients.iter().map(|&(c, a)| (vars[c.0], a)), op, row.rhs);
    }
    (lp, vars)
}

/// Solves the LP relaxation only (binary columns treated as `[0, 1]`).
pub fn solve_lp(p: &MilpProblem) -> Result<MilpSolution, SolveError> {
    p.validate()?;
    let (lp, vars) = to_microlp(p, Duration::from_secs(3600 * 24));
    match outcome(lp.solve())? {
        Lp::Solved(s) => {
            let values: Vec<f64> = vars.iter().map(|&v| s.var_value_raw(v)).collect();
            let objective = p.objective_value(&values);
            Ok(MilpSolution { status: Status::Optimal, values, objective, bound: objective, nodes: 1 })
        }
        Lp::Infeasible => Ok(MilpSolution::empty(Status::Infeasible, f64::INFINITY, 1)),
        Lp::OutOfTime => Ok(MilpSolution::empty(Status::TimeLimit, f64::NEG_INFINITY, 1)),
    }
}

struct Node {
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, f64)>,
    warm: Option<Rc<Solution>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    p: &'a MilpProblem,
    vars: Vec<Variable>,
    binaries: Vec<usize>,
    /// Branching priority per column; higher is branched first.
    priority: Vec<u32>,
    root: Solution,
    incumbent: Option<(f64, Vec<f64>)>,
    heap: BinaryHeap<Node>,
    warm_open: usize,
    seq: u64,
    nodes: u64,
    /// Lowest bound among nodes discarded only because of the gap.
    pruned: f64,
    deadline: Instant,
}

impl Search<'_> {
    fn cutoff(&self, gap: f64) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - gap * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn prune(&mut self, bound: f64, gap: f64) -> bool {
        if bound < self.cutoff(gap) {
            return false;
        }
        if let Some((obj, _)) = &self.incumbent {
            if bound < *obj {
                self.pruned = self.pruned.min(bound);
            }
        }
        true
    }

    fn lp_objective(&self, s: &Solution) -> f64 {
        s.objective() + self.p.objective_offset
    }

    /// Most fractional binary of the highest priority class, lowest
    /// column on ties.
    fn branching_column(&self, s: &Solution) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, u32, f64)> = None;
        for &c in &self.binaries {
            let x = s.var_value_raw(self.vars[c]);
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac <= INT_TOL {
                continue;
            }
            let pr = self.priority[c];
            if best.is_none_or(|b| pr > b.2 || (pr == b.2 && frac > b.3)) {
                best = Some((c, x, pr, frac));
            }
        }
        best.map(|(c, x, _, _)| (c, x))
    }

    /// Node LP, re-solved from scratch if the warm start breaks down
    /// numerically.
    fn evaluate(&self, node: &Node) -> Result<Lp, SolveError> {
        match self.evaluate_warm(node) {
            Err(SolveError::Internal(_)) => self.cold(&node.fixings),
            r => r,
        }
    }

    fn cold(&self, fixings: &[(usize, f64)]) -> Result<Lp, SolveError> {
        let mut q = self.p.clone();
        for &(c, v) in fixings {
            q.fix(ColId(c), v);
        }
        let left = self.deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1));
        outcome(to_microlp(&q, left).0.solve())
    }

    fn evaluate_warm(&self, node: &Node) -> Result<Lp, SolveError> {
        match &node.warm {
            Some(parent) => {
                let &(c, v) = node.fixings.last().expect("warm nodes carry their branching fix");
                outcome((**parent).clone().fix_var(self.vars[c], v))
            }
            None => {
                let mut s = self.root.clone();
                for &(c, v) in &node.fixings {
                    match outcome(s.fix_var(self.vars[c], v))? {
                        Lp::Solved(next) => s = next,
                        other => return Ok(other),
                    }
                }
                Ok(Lp::Solved(s))
            }
        }
    }

    fn push(&mut self, bound: f64, fixings: Vec<(usize, f64)>, parent: Option<Rc<Solution>>) {
        let warm = if self.warm_open < WARM_NODES { parent } else { None };
        if warm.is_some() {
            self.warm_open += 1;
        }
        self.seq += 1;
        self.heap.push(Node { bound, seq: self.seq, fixings, warm });
    }

    fn record(&mut self, s: &Solution) {
        let mut values: Vec<f64> = self.vars.iter().map(|&v| s.var_value_raw(v)).collect();
        for &c in &self.binaries {
            values[c] = values[c].round();
        }
        let obj = self.p.objective_value(&values);
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
            self.incumbent = Some((obj, values));
        }
    }
}

/// Branch-and-bound on the presolved problem. Deterministic for fixed
/// limits unless the time limit interrupts the search.
pub fn solve(p: &MilpProblem, limits: &Limits) -> Result<MilpSolution, SolveError> {
    solve_with_priorities(p, limits, &[])
}

/// As [`solve`], branching first on columns with a higher `priority`
/// (indexed by column; missing entries count as 0).
pub fn solve_with_priorities(p: &MilpProblem, limits: &Limits, priority: &[u32]) -> Result<MilpSolution, SolveError> {
    p.validate()?;
    let started = Instant::now();
    let pre = match presolve(p) {
        Ok(pre) => pre,
        Err(_) => return Ok(MilpSolution::empty(Status::Infeasible, f64::INFINITY, 0)),
    };
    let limit = Duration::try_from_secs_f64(limits.time_s.max(0.0)).unwrap_or(FOREVER).min(FOREVER);
    let reduced: Vec<u32> = pre.kept.iter().map(|c| priority.get(c.0).copied().unwrap_or(0)).collect();
    let sol = branch_and_bound(&pre.problem, limits, &reduced, started, limit)?;
    Ok(postsolve(p, &pre, sol))
}

fn postsolve(p: &MilpProblem, pre: &Presolved, mut sol: MilpSolution) -> MilpSolution {
    if sol.is_feasible() {
        sol.values = pre.expand(&sol.values);
        for (v, c) in sol.values.iter_mut().zip(&p.columns) {
            if c.kind == ColumnKind::Binary {
                *v = v.round();
            }
        }
        sol.objective = p.objective_value(&sol.values);
        sol.bound = sol.bound.min(sol.objective);
    }
    sol
}

fn branch_and_bound(
    p: &MilpProblem,
    limits: &Limits,
    priority: &[u32],
    started: Instant,
    limit: Duration,
) -> Result<MilpSolution, SolveError> {
    let (lp, vars) = to_microlp(p, limit.saturating_sub(started.elapsed()).max(Duration::from_millis(1)));
    let root = match outcome(lp.solve())? {
        Lp::Solved(s) => s,
        Lp::Infeasible => return Ok(MilpSolution::empty(Status::Infeasible, f64::INFINITY, 1)),
        Lp::OutOfTime => return Ok(MilpSolution::empty(Status::TimeLimit, f64::NEG_INFINITY, 1)),
    };
    let binaries = p.columns.iter().enumerate().filter(|(_, c)| c.kind == ColumnKind::Binary).map(|(i, _)| i).collect();
    let mut search = Search {
        p,
        vars,
        binaries,
        priority: priority.to_vec(),
        root: root.clone(),
        incumbent: None,
        heap: BinaryHeap::new(),
        warm_open: 0,
        seq: 0,
        nodes: 1,
        pruned: f64::INFINITY,
        deadline: started + limit,
    };
    let root_bound = search.lp_objective(&root);
    // The node being plunged into, already solved.
    let mut dive: Option<(Solution, Vec<(usize, f64)>)> = Some((root, Vec::new()));
    let mut status = Status::Optimal;

    loop {
        let (sol, fixings) = match dive.take() {
            Some(d) => d,
            None => {
                let Some(node) = search.heap.pop() else { break };
                if node.warm.is_some() {
                    search.warm_open -= 1;
                }
                if search.prune(node.bound, limits.gap) {
                    continue;
                }
                if search.nodes >= limits.node_cap {
                    search.heap.push(node);
                    status = Status::GapLimit;
                    break;
                }
                if started.elapsed() >= limit {
                    search.heap.push(node);
                    status = Status::TimeLimit;
                    break;
                }
                search.nodes += 1;
                match search.evaluate(&node)? {
                    Lp::Solved(s) => (s, node.fixings),
                    Lp::Infeasible => continue,
                    Lp::OutOfTime => {
                        search.heap.push(node);
                        status = Status::TimeLimit;
                        break;
                    }
                }
            }
        };
        let obj = search.lp_objective(&sol);
        if search.prune(obj, limits.gap) {
            continue;
        }
        let Some((col, x)) = search.branching_column(&sol) else {
            search.record(&sol);
            continue;
        };
        let (first, second) = if x >= 0.5 { (1.0, 0.0) } else { (0.0, 1.0) };
        let mut other = fixings.clone();
        other.push((col, second));
        let sol = Rc::new(sol);
        search.push(obj, other, Some(Rc::clone(&sol)));

        // Plunge into the child on the rounding side.
        if search.nodes >= limits.node_cap || started.elapsed() >= limit {
            let mut child = fixings;
            child.push((col, first));
            search.push(obj, child, Some(sol));
            continue;
        }
        search.nodes += 1;
        let parent = Rc::try_unwrap(sol).unwrap_or_else(|rc| (*rc).clone());
        let mut child = fixings;
        child.push((col, first));
        let next = match outcome(parent.fix_var(search.vars[col], first)) {
            Err(SolveError::Internal(_)) => search.cold(&child)?,
            r => r?,
        };
        match next {
            Lp::Solved(s) => dive = Some((s, child)),
            Lp::Infeasible => {}
            Lp::OutOfTime => {
                search.push(obj, child, None);
                status = Status::TimeLimit;
                break;
            }
        }
    }

    let open_bound = search.heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match search.incumbent {
        Some((objective, values)) => {
            let bound = open_bound.min(search.pruned).min(objective).max(root_bound.min(objective));
            let closed = objective - bound <= limits.gap * objective.abs().max(1.0);
            let status = if closed { Status::Optimal } else { status };
            Ok(MilpSolution { status, values, objective, bound, nodes: search.nodes })
        }
        None if status == Status::Optimal => Ok(MilpSolution::empty(Status::Infeasible, f64::INFINITY, search.nodes)),
        None => Ok(MilpSolution::empty(status, open_bound.max(root_bound), search.nodes)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{ColId, RowSense};
    use crate::oracle::enumerate_milp;
    use proptest::prelude::*;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpProblem {
        let mut p = MilpProblem::new("knap");
        let xs: Vec<_> = values.iter().enumerate().map(|(i, v)| p.add_binary(format!("x{i}"), -v)).collect();
        p.add_row("cap", RowSense::Le, cap, xs.iter().zip(weights).map(|(&x, &w)| (x, w)));
        p
    }

    fn brute_knapsack(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let n = values.len();
        (0u32..1 << n)
            .filter(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| weights[i]).sum::<f64>() <= cap)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| values[i]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn lp_only_problem() {
        // min -x - y, x + 2y <= 4, 3x + y <= 6
        let mut p = MilpProblem::new("lp");
        let x = p.add_continuous("x", 0.0, f64::INFINITY, -1.0);
        let y = p.add_continuous("y", 0.0, f64::INFINITY, -1.0);
        p.add_row("a", RowSense::Le, 4.0, [(x, 1.0), (y, 2.0)]);
        p.add_row("b", RowSense::Le, 6.0, [(x, 3.0), (y, 1.0)]);
        let s = solve(&p, &Limits::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 2.8).abs() < 1e-9);
        assert!((s.values[0] - 1.6).abs() < 1e-9 && (s.values[1] - 1.2).abs() < 1e-9);
        assert!(p.max_violation(&s.values) < 1e-7);
    }

    #[test]
    fn twelve_item_knapsack_matches_enumeration() {
        let values = [12.0, 7.0, 9.0, 3.0, 15.0, 4.0, 8.0, 11.0, 6.0, 5.0, 10.0, 2.0];
        let weights = [7.0, 4.0, 5.0, 2.0, 9.0, 3.0, 5.0, 6.0, 4.0, 3.0, 6.0, 1.0];
        let p = knapsack(&values, &weights, 26.0);
        let s = solve(&p, &Limits { gap: 0.0, ..Limits::default() }).unwrap();
        assert_eq!(s.status, Status::Optimal);
        let best = brute_knapsack(&values, &weights, 26.0);
        assert!((s.objective + best).abs() < 1e-9, "{} vs {}", s.objective, best);
        assert!(s.bound <= s.objective + 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = MilpProblem::new("inf");
        let x = p.add_continuous("x", 0.0, 5.0, 1.0);
        let y = p.add_continuous("y", 0.0, 5.0, 1.0);
        p.add_row("ge", RowSense::Ge, 1.0, [(x, 1.0)]);
        p.add_row("le", RowSense::Le, 0.0, [(x, 1.0)]);
        p.add_row("other", RowSense::Ge, 1.0, [(x, 1.0), (y, 1.0)]);
        assert_eq!(solve(&p, &Limits::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn infeasible_after_branching() {
        // x + y = 1 with x = y is LP feasible (0.5, 0.5) but has no 0/1 point.
        let mut p = MilpProblem::new("odd");
        let x = p.add_binary("x", 1.0);
        let y = p.add_binary("y", 1.0);
        p.add_row("sum", RowSense::Eq, 1.0, [(x, 1.0), (y, 1.0)]);
        p.add_row("same", RowSense::Eq, 0.0, [(x, 1.0), (y, -1.0)]);
        assert_eq!(solve(&p, &Limits::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn unbounded_relaxation() {
        let mut p = MilpProblem::new("unb");
        let x = p.add_continuous("x", 0.0, f64::INFINITY, -1.0);
        let b = p.add_binary("b", 0.0);
        p.add_row("r", RowSense::Ge, 0.0, [(x, 1.0), (b, -1.0)]);
        assert_eq!(solve(&p, &Limits::default()), Err(SolveError::Unbounded));
    }

    #[test]
    fn node_cap_reports_gap_limit() {
        let values: Vec<f64> = (0..18).map(|i| 10.0 + ((i * 7) % 11) as f64 + 0.5).collect();
        let weights: Vec<f64> = (0..18).map(|i| 5.0 + ((i * 5) % 9) as f64 + 0.25).collect();
        let p = knapsack(&values, &weights, 41.3);
        let s = solve(&p, &Limits { node_cap: 2, gap: 0.0, ..Limits::default() }).unwrap();
        assert_ne!(s.status, Status::Optimal);
        assert!(s.bound <= s.objective);
    }

    #[test]
    fn solve_is_deterministic() {
        let values = [5.0, 4.0, 3.0, 7.0, 6.0, 2.0, 9.0, 1.0];
        let weights = [3.0, 2.0, 2.0, 5.0, 4.0, 1.0, 6.0, 1.0];
        let p = knapsack(&values, &weights, 11.0);
        let a = solve(&p, &Limits::default()).unwrap();
        let b = solve(&p, &Limits::default()).unwrap();
        assert_eq!(a, b);
    }

    fn random_milp() -> impl Strategy<Value = MilpProblem> {
        let col = (any::<bool>(), -5i32..=5, 0i32..=3);
        let row = (proptest::collection::vec(-4i32..=4, 6), 0usize..3, -3i32..=8);
        (proptest::collection::vec(col, 1..=6), proptest::collection::vec(row, 0..=5)).prop_map(|(cols, rows)| {
            let mut p = MilpProblem::new("rand");
            for (i, (bin, obj, ub)) in cols.iter().enumerate() {
                if *bin {
                    p.add_binary(format!("b{i}"), f64::from(*obj));
                } else {
                    p.add_continuous(format!("c{i}"), 0.0, f64::from(*ub) + 0.5, f64::from(*obj));
                }
            }
            for (j, (coefs, sense, rhs)) in rows.iter().enumerate() {
                let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][*sense];
                let terms = coefs.iter().take(cols.len()).enumerate().map(|(i, &a)| (ColId(i), f64::from(a)));
                p.add_row(format!("r{j}"), sense, f64::from(*rhs), terms);
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn optimal_matches_enumeration(p in random_milp()) {
            let s = solve(&p, &Limits { gap: 0.0, ..Limits::default() }).unwrap();
            match enumerate_milp(&p) {
                None => prop_assert_eq!(s.status, Status::Infeasible),
                Some(best) => {
                    prop_assert_eq!(s.status, Status::Optimal);
                    prop_assert!((s.objective - best).abs() < 1e-6, "{} vs {}", s.objective, best);
                    prop_assert!(p.max_violation(&s.values) < 1e-7);
                    prop_assert!(s.bound <= s.objective + 1e-9);
                }
            }
        }
    }

    #[test]
    fn offset_is_included() {
        let mut p = MilpProblem::new("off");
        p.add_binary("x", 2.0);
        p.objective_offset = 3.5;
        let s = solve(&p, &Limits::default()).unwrap();
        assert_eq!(s.objective, 3.5);
    }
}
