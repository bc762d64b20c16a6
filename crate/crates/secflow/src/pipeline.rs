//! Instance in, configuration and risk figures out; alpha/beta sweeps.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::{AttackGraph, EdgeId};
use crate::exact_risk::{arisk_with_severed, risk_from_scores};
use crate::instance::{AssembledGraph, Instance, InstanceError};
use crate::milp::{Limits, SolveError, Status};
use crate::model::{build, extract_configuration, ConfigError, Configuration, ModelError, ModelWeights};
use crate::network::NetworkInstance;
use crate::risk_measures::{self, MeasureError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("solver stopped with status {} and no feasible configuration", .0.as_str())]
    NoSolution(Status),
    #[error("sweep needs at least one alpha and one beta")]
    EmptySweep,
    #[error("alpha {0} must be in (0, 1]")]
    BadAlpha(f64),
}

/// Exact risk and the two approximations for one configured graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Solver outcome; absent when no solver was involved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<Status>,
    pub risk: f64,
    pub reach: f64,
    pub path: f64,
    pub hybrid: f64,
    /// Probability per node id of the evaluated graph (0 is the attacker
    /// source, 1 the target sink).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probabilities: Vec<f64>,
}

/// Risk figures of `g` with `severed` arcs removed.
pub fn evaluate_graph(g: &AttackGraph, severed: &BTreeSet<EdgeId>, beta: f64, epsilon: f64) -> Result<RiskReport, MeasureError> {
    let scores = arisk_with_severed(g, severed);
    let reach = risk_measures::reach(g, severed).value;
    let path = risk_measures::path(g, severed, epsilon)?;
    let hybrid = risk_measures::hybrid(reach, risk_measures::total_impact(g), path, beta)?;
    Ok(RiskReport { status: None, risk: risk_from_scores(g, &scores), reach, path, hybrid, probabilities: scores.as_slice().to_vec() })
}

/// Prerequisite arcs of network exploits whose connection is realized by
/// no delivered flow.
pub fn severed_edges(net: &NetworkInstance, asm: &AssembledGraph, config: &Configuration) -> BTreeSet<EdgeId> {
    let live: BTreeSet<_> = config.delivered.iter().filter_map(|&f| net.connection_of(f)).collect();
    asm.connections.iter().filter(|(c, _)| !live.contains(*c)).flat_map(|(_, &ex)| asm.graph.in_edges(ex).iter().copied()).collect()
}

/// Risk figures of `config` applied to the instance.
pub fn evaluate_configuration(
    inst: &Instance,
    asm: &AssembledGraph,
    config: &Configuration,
    w: &ModelWeights,
) -> Result<RiskReport, MeasureError> {
    let severed = severed_edges(&inst.network, asm, config);
    let mut r = evaluate_graph(&asm.graph, &severed, w.beta, w.epsilon)?;
    r.probabilities.clear();
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub configuration: Configuration,
    pub report: RiskReport,
    pub solve_time_s: f64,
}

/// Builds and solves the model, then re-evaluates the configuration with
/// the exact risk.
pub fn solve_instance(inst: &Instance, w: &ModelWeights, limits: &Limits) -> Result<Solved, PipelineError> {
    let asm = inst.assemble()?;
    solve_assembled(inst, &asm, w, limits)
}

fn solve_assembled(inst: &Instance, asm: &AssembledGraph, w: &ModelWeights, limits: &Limits) -> Result<Solved, PipelineError> {
    let model = build(&inst.network, asm, w)?;
    let start = Instant::now();
    let sol = model.solve(limits)?;
    let solve_time_s = start.elapsed().as_secs_f64();
    if !sol.is_feasible() {
        return Err(PipelineError::NoSolution(sol.status));
    }
    let configuration = extract_configuration(&inst.network, &model, &sol.values)?;
    let mut report = evaluate_configuration(inst, asm, &configuration, w)?;
    report.status = Some(sol.status);
    Ok(Solved { configuration, report, solve_time_s })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub delivered_value: f64,
    pub functionality_norm: f64,
    pub risk_exact: f64,
    pub risk_norm: f64,
    pub reach: f64,
    pub path: f64,
    pub hybrid: f64,
    pub solve_status: Status,
    pub solve_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Blocked flow counts per row, in row order.
    pub blocked: Vec<BlockedCounts>,
}

/// Blocked flows split by whether a gateway is an endpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedCounts {
    pub internal: usize,
    pub external: usize,
}

pub fn blocked_counts(net: &NetworkInstance, config: &Configuration) -> BlockedCounts {
    let mut c = BlockedCounts::default();
    for &f in &config.blocked {
        let flow = &net.flows[f];
        if net.is_gateway(flow.src) || net.is_gateway(flow.dst) {
            c.external += 1;
        } else {
            c.internal += 1;
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub limits: Limits,
    /// Record wall-clock solve times; when off `solve_time_s` is 0 so
    /// reports are reproducible byte for byte.
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { limits: Limits::default(), timing: true }
    }
}

/// One row per `(alpha, beta)`, ordered by beta then alpha. Normalizers
/// come from the `alpha = 1` solve of the same beta.
pub fn sweep(
    inst: &Instance,
    base: &ModelWeights,
    alphas: &[f64],
    betas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult, PipelineError> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(PipelineError::EmptySweep);
    }
    if let Some(&a) = alphas.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(PipelineError::BadAlpha(a));
    }
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let mut betas = betas.to_vec();
    betas.sort_by(f64::total_cmp);
    betas.dedup();

    let asm = inst.assemble()?;
    let mut rows = Vec::new();
    let mut blocked = Vec::new();
    for &beta in &betas {
        let run = |alpha: f64| solve_assembled(inst, &asm, &base.with_alpha_beta(alpha, beta), &opts.limits);
        let baseline = run(1.0)?;
        let base_value = baseline.configuration.delivered_value(&inst.network);
        let base_risk = baseline.report.risk;
        for &alpha in &alphas {
            let s = if alpha == 1.0 { baseline.clone() } else { run(alpha)? };
            let delivered_value = s.configuration.delivered_value(&inst.network);
            rows.push(SweepRow {
                alpha,
                beta,
                delivered_value,
                functionality_norm: ratio(delivered_value, base_value),
                risk_exact: s.report.risk,
                risk_norm: ratio(s.report.risk, base_risk),
                reach: s.report.reach,
                path: s.report.path,
                hybrid: s.report.hybrid,
                solve_status: s.report.status.unwrap_or(Status::Optimal),
                solve_time_s: if opts.timing { s.solve_time_s } else { 0.0 },
            });
            blocked.push(blocked_counts(&inst.network, &s.configuration));
        }
    }
    Ok(SweepResult { rows, blocked })
}

fn ratio(x: f64, base: f64) -> f64 {
    if base > 0.0 {
        x / base
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Sweep rows as CSV (header plus one line per row) or a JSON array.
pub fn report(sweep: &SweepResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(&sweep.rows).expect("rows always serialize") + "\n",
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &sweep.rows {
                w.serialize(r).expect("rows always serialize");
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
        }
    }
}

/// Blocked flow counts as CSV, one line per sweep row.
pub fn blocked_report(sweep: &SweepResult) -> String {
    #[derive(Serialize)]
    struct Line {
        alpha: f64,
        beta: f64,
        blocked_internal: usize,
        blocked_external: usize,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for (r, b) in sweep.rows.iter().zip(&sweep.blocked) {
        let line = Line { alpha: r.alpha, beta: r.beta, blocked_internal: b.internal, blocked_external: b.external };
        w.serialize(line).expect("rows always serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

/// Spearman rank correlation with average ranks for ties. `None` when a
/// side is constant or the lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// `0.1, 0.2, ..., 1.0`.
pub fn default_alphas() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}
