use std::collections::BTreeMap;

use secflow::milp::{Limits, Status};
use secflow::model::Configuration;
use secflow::network::NetworkInstance;
use secflow::pipeline::{
    blocked_counts, blocked_report, default_alphas, evaluate_configuration, report, solve_instance, spearman, sweep, PipelineError,
    ReportFormat, SweepOptions, SweepResult,
};
use secflow::toy::{toy_instance, toy_weights};

fn toy_sweep() -> SweepResult {
    let opts = SweepOptions { timing: false, ..Default::default() };
    sweep(&toy_instance(), &toy_weights(), &default_alphas(), &[0.0, 0.5, 1.0], &opts).unwrap()
}

/// Checks that every delivered flow follows a loop-free route from source
/// to destination and that no arc carries more than its capacity.
fn check_routes(net: &NetworkInstance, config: &Configuration) {
    let mut next: BTreeMap<(usize, u32), u32> = BTreeMap::new();
    for r in &config.routing {
        assert!(next.insert((r.flow, r.device), r.next_hop).is_none(), "two next hops for flow {} at {}", r.flow, r.device);
    }
    let mut load: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for &f in &config.delivered {
        let flow = &net.flows[f];
        let mut at = flow.src;
        let mut hops = 0;
        while at != flow.dst {
            let to = *next.get(&(f, at)).unwrap_or_else(|| panic!("flow {f} stops at {at}"));
            *load.entry((at, to)).or_default() += flow.quantity;
            at = to;
            hops += 1;
            assert!(hops <= net.routers.len() + 2, "flow {f} loops");
        }
    }
    for a in net.arcs() {
        let l = load.get(&(a.from, a.to)).copied().unwrap_or(0.0);
        assert!(l <= a.capacity + 1e-6, "arc {}->{} carries {l} over {}", a.from, a.to, a.capacity);
    }
}

#[test]
fn toy_sweep_matches_golden_csv() {
    assert_eq!(report(&toy_sweep(), ReportFormat::Csv), include_str!("data/toy_sweep.csv"));
}

#[test]
fn json_report_parses_back() {
    let res = toy_sweep();
    let text = report(&res, ReportFormat::Json);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v.as_array().unwrap().len(), res.rows.len());
    assert_eq!(v[0]["solve_status"], "optimal");
}

#[test]
fn blocked_counts_line_up_with_rows() {
    let res = toy_sweep();
    let text = blocked_report(&res);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,beta,blocked_internal,blocked_external"));
    assert_eq!(lines.count(), res.rows.len());
    let flows = toy_instance().network.flows.len();
    for b in &res.blocked {
        assert!(b.internal + b.external <= flows);
    }
}

#[test]
fn functionality_and_risk_grow_with_alpha() {
    let res = toy_sweep();
    for beta_rows in res.rows.chunk_by(|a, b| a.beta == b.beta) {
        for w in beta_rows.windows(2) {
            assert!(w[1].functionality_norm >= w[0].functionality_norm - 1e-9);
            assert!(w[1].risk_norm >= w[0].risk_norm - 1e-9);
        }
        let last = beta_rows.last().unwrap();
        assert_eq!(last.alpha, 1.0);
        assert_eq!(last.functionality_norm, 1.0);
        assert!(beta_rows.iter().all(|r| r.solve_status == Status::Optimal));
    }
}

#[test]
fn hybrid_ranks_like_exact_risk() {
    let res = toy_sweep();
    let rows: Vec<_> = res.rows.iter().filter(|r| r.beta == 0.5).collect();
    let hybrid: Vec<f64> = rows.iter().map(|r| r.hybrid).collect();
    let risk: Vec<f64> = rows.iter().map(|r| r.risk_norm).collect();
    assert!(spearman(&hybrid, &risk).unwrap() >= 0.9);
}

#[test]
fn solved_configurations_are_consistent() {
    let inst = toy_instance();
    let net = &inst.network;
    for alpha in [0.1, 0.5, 0.9, 1.0] {
        let w = toy_weights().with_alpha_beta(alpha, 0.5);
        let s = solve_instance(&inst, &w, &Limits::default()).unwrap();
        let c = &s.configuration;
        for f in 0..net.flows.len() {
            assert!(c.is_delivered(f) != c.blocked.contains(&f), "flow {f} is delivered xor blocked");
        }
        let blocked_value: f64 = c.blocked.iter().map(|&f| net.flows[f].value).sum();
        assert!((c.delivered_value(net) + blocked_value - net.total_value()).abs() < 1e-9);
        let counts = blocked_counts(net, c);
        assert_eq!(counts.internal + counts.external, c.blocked.len());
        check_routes(net, c);

        let again = evaluate_configuration(&inst, &inst.assemble().unwrap(), c, &w).unwrap();
        assert!((again.risk - s.report.risk).abs() < 1e-12);
        assert_eq!(again.reach, s.report.reach);

        let back = Configuration::from_json(&c.to_json()).unwrap();
        assert_eq!(&back, c);
    }
}

#[test]
fn sweep_rejects_bad_grids() {
    let inst = toy_instance();
    let opts = SweepOptions::default();
    assert!(matches!(sweep(&inst, &toy_weights(), &[], &[0.5], &opts), Err(PipelineError::EmptySweep)));
    assert!(matches!(sweep(&inst, &toy_weights(), &[0.5], &[], &opts), Err(PipelineError::EmptySweep)));
    assert!(matches!(sweep(&inst, &toy_weights(), &[0.0, 0.5], &[0.5], &opts), Err(PipelineError::BadAlpha(a)) if a == 0.0));
}

#[test]
fn sweep_sorts_and_dedups_the_grid() {
    let opts = SweepOptions { timing: false, ..Default::default() };
    let res = sweep(&toy_instance(), &toy_weights(), &[1.0, 0.5, 0.5], &[1.0], &opts).unwrap();
    let alphas: Vec<f64> = res.rows.iter().map(|r| r.alpha).collect();
    assert_eq!(alphas, [0.5, 1.0]);
    assert!(res.rows.iter().all(|r| r.solve_time_s == 0.0));
}
