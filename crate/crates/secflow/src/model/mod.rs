//! The joint routing and hardening program: flow variables, firewall
//! variables, attack-graph reachability, and the dual of the most
//! effective path.

mod config;
mod logic;
mod registry;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::{AttackGraph, DeviceId, EdgeId, Logic, Node, NodeId};
use crate::instance::{AssembledGraph, Instance, InstanceError};
use crate::milp::{solve_with_priorities, ColId, Limits, MilpProblem, MilpSolution, RowSense, SolveError};
use crate::network::{Connection, NetworkInstance};
use crate::risk_measures::min_probability;

pub use config::{extract_configuration, ConfigError, Configuration, FirewallKind, FirewallRule, ObjectiveTerms, RouteEntry};
pub use logic::{linearize_and, linearize_or};
pub use registry::{Hop, TypeIdx, Var, VariableRegistry};

/// Weight on every `r` so unreachable nodes on zero-impact cycles settle
/// at 0.
pub const REACH_TIE: f64 = 1e-9;
/// Weight on every firewall column so idle rules are not deployed.
pub const RULE_TIE: f64 = 1e-7;
/// Weight on every routed arc so detours and idle loops are avoided.
pub const ROUTE_TIE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelWeights {
    /// 1 optimizes functionality only, 0 security only.
    pub alpha: f64,
    /// 1 uses reach only inside the security term, 0 path only.
    pub beta: f64,
    /// Delivered value.
    pub alpha0: f64,
    /// Link cost.
    pub alpha1: f64,
    /// Flow-specific rules.
    pub alpha2: f64,
    /// Type rules.
    pub alpha3: f64,
    /// Devices running a firewall.
    pub alpha4: f64,
    /// Defense cost inside the security term.
    pub beta0: f64,
    /// Weight given to a severed attack-graph edge on the path block.
    pub epsilon: f64,
}

impl Default for ModelWeights {
    fn default() -> Self {
        ModelWeights { alpha: 0.5, beta: 0.5, alpha0: 1.0, alpha1: 0.01, alpha2: 0.1, alpha3: 0.1, alpha4: 0.05, beta0: 0.1, epsilon: 1e-6 }
    }
}

impl ModelWeights {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn with_alpha_beta(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str, v: f64| Err(ModelError::BadWeight(what.to_string(), v));
        for (what, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(what, v);
            }
        }
        for (what, v) in [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
            ("beta0", self.beta0),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(what, v);
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return bad("epsilon", self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("weight {0} = {1} is out of range")]
    BadWeight(String, f64),
    #[error("epsilon {epsilon} must be below the smallest exploit probability {limit}")]
    BadEpsilon { epsilon: f64, limit: f64 },
    #[error("attack graph has no target exploits; augment it first")]
    NotAugmented,
    #[error("infeasible by construction: {0}")]
    InfeasibleByConstruction(String),
}

/// Linear expressions of the four objective terms, without tie-breaks.
#[derive(Clone, Debug, Default)]
pub struct TermExprs {
    pub functionality: Vec<(ColId, f64)>,
    pub defense: Vec<(ColId, f64)>,
    pub reach: Vec<(ColId, f64)>,
    pub path: Vec<(ColId, f64)>,
}

fn eval(expr: &[(ColId, f64)], values: &[f64]) -> f64 {
    expr.iter().map(|&(c, a)| a * values[c.0]).sum()
}

impl TermExprs {
    pub fn evaluate(&self, values: &[f64]) -> ObjectiveTerms {
        ObjectiveTerms {
            of: eval(&self.functionality, values),
            od: eval(&self.defense, values),
            or: eval(&self.reach, values),
            op: eval(&self.path, values),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub problem: MilpProblem,
    pub registry: VariableRegistry,
    pub terms: TermExprs,
    pub weights: ModelWeights,
    /// Branching priority per column.
    pub priorities: Vec<u32>,
}

impl Model {
    /// Solves with the model's branching priorities.
    pub fn solve(&self, limits: &Limits) -> Result<MilpSolution, SolveError> {
        solve_with_priorities(&self.problem, limits, &self.priorities)
    }
}

/// Delivery decisions first, then connections, firewall rules and
/// attacker reachability; routing last.
fn priority_of(v: &Var) -> u32 {
    match v {
        Var::Rho(_, _, Hop::Sink) => 5,
        Var::Conn(..) => 4,
        Var::FlowRule(..) | Var::TypeRule(..) | Var::Firewall(_) => 3,
        Var::R(_) | Var::X(..) => 2,
        _ => 0,
    }
}

/// How an attack-graph arc is controlled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArcState {
    Present,
    Severed,
    /// Presence given by a binary column.
    Column(ColId),
}

struct Builder {
    p: MilpProblem,
    reg: VariableRegistry,
    terms: TermExprs,
    /// Objective coefficients that are not part of any term.
    ties: Vec<(ColId, f64)>,
}

impl Builder {
    fn new(name: &str) -> Self {
        Builder { p: MilpProblem::new(name), reg: VariableRegistry::default(), terms: TermExprs::default(), ties: Vec::new() }
    }

    fn binary(&mut self, v: Var) -> ColId {
        let c = self.p.add_binary(v.to_string(), 0.0);
        self.reg.insert(v, c);
        c
    }

    fn fixed(&mut self, v: Var, value: f64) -> ColId {
        let c = self.binary(v);
        self.p.fix(c, value);
        c
    }

    fn continuous(&mut self, v: Var, lo: f64, hi: f64) -> ColId {
        let c = self.p.add_continuous(v.to_string(), lo, hi, 0.0);
        self.reg.insert(v, c);
        c
    }

    fn finish(mut self, w: &ModelWeights) -> Model {
        let (a, b) = (w.alpha, w.beta);
        let mut obj = vec![0.0; self.p.columns.len()];
        let scaled = [
            (&self.terms.functionality, a),
            (&self.terms.defense, (1.0 - a) * w.beta0),
            (&self.terms.reach, (1.0 - a) * b),
            (&self.terms.path, (1.0 - a) * (1.0 - b)),
        ];
        for (expr, k) in scaled {
            for &(c, coef) in expr {
                obj[c.0] += k * coef;
            }
        }
        for &(c, coef) in &self.ties {
            obj[c.0] += coef;
        }
        for (col, o) in self.p.columns.iter_mut().zip(obj) {
            col.objective = o;
        }
        let mut priorities = vec![0; self.p.columns.len()];
        for (v, c) in self.reg.iter() {
            priorities[c.0] = priorities[c.0].max(priority_of(v));
        }
        Model { problem: self.p, registry: self.reg, terms: self.terms, weights: *w, priorities }
    }

    /// Reachability and path blocks over `g`, with each arc's presence
    /// given by `state`.
    fn attack_block(&mut self, g: &AttackGraph, epsilon: f64, state: impl Fn(EdgeId) -> ArcState) {
        for (id, _) in g.nodes() {
            // The attacker always holds its start capabilities.
            if id == AttackGraph::SIGMA || g.is_start(id) {
                self.fixed(Var::R(id), 1.0);
            } else {
                let c = self.binary(Var::R(id));
                self.ties.push((c, REACH_TIE));
            }
        }
        let mut x_of = Vec::with_capacity(g.edge_count());
        for (eid, e) in g.edges() {
            let (t, h) = (e.tail, e.head);
            let r_tail = self.reg.col(&Var::R(t));
            let x = match state(eid) {
                ArcState::Present => {
                    // x = r(tail) AND 1 is r(tail) itself.
                    self.reg.insert(Var::X(t, h), r_tail);
                    r_tail
                }
                ArcState::Severed => self.fixed(Var::X(t, h), 0.0),
                ArcState::Column(a) => {
                    let x = self.binary(Var::X(t, h));
                    linearize_and(&mut self.p, &format!("x({},{})", t.0, h.0), x, &[r_tail, a]);
                    x
                }
            };
            x_of.push(x);
        }
        for (id, node) in g.nodes() {
            let ins: Vec<ColId> = g.in_edges(id).iter().map(|e| x_of[e.0]).collect();
            let r = self.reg.col(&Var::R(id));
            let name = format!("r({})", id.0);
            match node {
                _ if id == AttackGraph::SIGMA || g.is_start(id) => {}
                Node::Exploit(ex) if ex.logic == Logic::And => linearize_and(&mut self.p, &name, r, &ins),
                _ => linearize_or(&mut self.p, &name, r, &ins),
            }
            if let Node::Capability(c) = node {
                if c.impact != 0.0 {
                    self.terms.reach.push((r, c.impact));
                }
            }
        }

        let big = g.edge_count().max(1) as f64 * epsilon.ln().abs();
        for (id, _) in g.nodes() {
            self.continuous(Var::Y(id), -big, big);
        }
        let log_eps = epsilon.ln();
        for (eid, e) in g.edges() {
            let yt = self.reg.col(&Var::Y(e.tail));
            let yh = self.reg.col(&Var::Y(e.head));
            let log_w = g.head_weight(e.head).ln();
            let name = format!("dual({},{})", e.tail.0, e.head.0);
            match state(eid) {
                ArcState::Present => self.p.add_row(name, RowSense::Ge, log_w, [(yt, 1.0), (yh, -1.0)]),
                ArcState::Severed => self.p.add_row(name, RowSense::Ge, log_eps, [(yt, 1.0), (yh, -1.0)]),
                ArcState::Column(a) => self.p.add_row(name, RowSense::Ge, log_eps, [(yt, 1.0), (yh, -1.0), (a, log_eps - log_w)]),
            };
        }
        self.terms.path.push((self.reg.col(&Var::Y(AttackGraph::SIGMA)), 1.0));
        self.terms.path.push((self.reg.col(&Var::Y(AttackGraph::MU)), -1.0));
    }
}

fn check_graph(g: &AttackGraph, w: &ModelWeights) -> Result<(), ModelError> {
    w.validate()?;
    if !g.is_augmented() {
        return Err(ModelError::NotAugmented);
    }
    let limit = min_probability(g);
    if w.epsilon >= limit {
        return Err(ModelError::BadEpsilon { epsilon: w.epsilon, limit });
    }
    Ok(())
}

/// Attack-graph part alone, with fixed arc presence. `severed` arcs are
/// absent, every other arc present. The objective is
/// `beta * reach + (1 - beta) * path` (alpha and the defense term play no
/// role).
pub fn build_attack_only(g: &AttackGraph, severed: &BTreeSet<EdgeId>, w: &ModelWeights) -> Result<Model, ModelError> {
    check_graph(g, w)?;
    let mut b = Builder::new("attack");
    b.attack_block(g, w.epsilon, |e| if severed.contains(&e) { ArcState::Severed } else { ArcState::Present });
    Ok(b.finish(&ModelWeights { alpha: 0.0, ..*w }))
}

/// Full model for a network and the attack graph assembled from it.
pub fn build(net: &NetworkInstance, asm: &AssembledGraph, w: &ModelWeights) -> Result<Model, ModelError> {
    net.validate().map_err(InstanceError::from)?;
    let g = &asm.graph;
    check_graph(g, w)?;
    let mut b = Builder::new("secflow");
    let arcs = net.arcs();
    let routers: BTreeSet<DeviceId> = net.routers.iter().copied().collect();
    let type_idx: BTreeMap<&str, TypeIdx> = net.traffic_types.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    for (f, flow) in net.flows.iter().enumerate() {
        if net.is_host(flow.src) && !arcs.iter().any(|a| a.from == flow.src) {
            return Err(ModelError::InfeasibleByConstruction(format!("flow {f} starts at host {} with no links", flow.src)));
        }
    }

    // Routing columns.
    for (f, flow) in net.flows.iter().enumerate() {
        b.fixed(Var::Rho(f, Hop::Source, Hop::Device(flow.src)), 1.0);
        for a in &arcs {
            let c = b.binary(Var::Rho(f, Hop::Device(a.from), Hop::Device(a.to)));
            b.terms.functionality.push((c, w.alpha1 * a.cost));
            b.ties.push((c, ROUTE_TIE));
        }
        let delivered = b.binary(Var::Rho(f, Hop::Device(flow.dst), Hop::Sink));
        b.terms.functionality.push((delivered, -w.alpha0 * flow.value));
    }
    // Firewall columns.
    for &i in &routers {
        for t in 0..net.traffic_types.len() {
            let c = b.binary(Var::TypeRule(t, i));
            b.terms.defense.push((c, w.alpha3));
            b.ties.push((c, RULE_TIE));
        }
        let c = b.binary(Var::Firewall(i));
        b.terms.defense.push((c, w.alpha4));
        b.ties.push((c, RULE_TIE));
    }

    let mut inbound: BTreeMap<(usize, DeviceId), Vec<ColId>> = BTreeMap::new();
    let mut outbound: BTreeMap<(usize, DeviceId), Vec<ColId>> = BTreeMap::new();
    for (f, flow) in net.flows.iter().enumerate() {
        inbound.entry((f, flow.src)).or_default().push(b.reg.col(&Var::Rho(f, Hop::Source, Hop::Device(flow.src))));
        for a in &arcs {
            let c = b.reg.col(&Var::Rho(f, Hop::Device(a.from), Hop::Device(a.to)));
            outbound.entry((f, a.from)).or_default().push(c);
            inbound.entry((f, a.to)).or_default().push(c);
        }
    }

    for (f, flow) in net.flows.iter().enumerate() {
        let t = type_idx[flow.traffic_type.as_str()];
        let delivered = b.reg.col(&Var::Rho(f, Hop::Device(flow.dst), Hop::Sink));
        for i in net.devices() {
            let ins = inbound.get(&(f, i)).cloned().unwrap_or_default();
            let outs = outbound.get(&(f, i)).cloned().unwrap_or_default();
            // Hosts other than the endpoints emit nothing; the destination
            // only hands the flow to the sink.
            if (net.is_host(i) && i != flow.src) || i == flow.dst {
                b.p.add_row(format!("emit({f},{i})"), RowSense::Eq, 0.0, outs.iter().map(|&c| (c, 1.0)));
            }
            let mut balance: Vec<(ColId, f64)> = ins.iter().map(|&c| (c, 1.0)).chain(outs.iter().map(|&c| (c, -1.0))).collect();
            if i == flow.dst {
                balance.push((delivered, -1.0));
            }
            if routers.contains(&i) {
                let blocked = b.binary(Var::Blocked(f, i));
                let rule = b.binary(Var::FlowRule(f, i));
                b.terms.defense.push((rule, w.alpha2));
                b.ties.push((rule, RULE_TIE));
                let recv = b.binary(Var::Recv(f, i));
                let type_block = b.binary(Var::TypeBlock(f, i));
                let v = b.reg.col(&Var::TypeRule(t, i));
                linearize_or(&mut b.p, &format!("theta({f},{i})"), recv, &ins);
                linearize_and(&mut b.p, &format!("beta({f},{i})"), type_block, &[recv, v]);
                linearize_or(&mut b.p, &format!("b({f},{i})"), blocked, &[rule, type_block]);
                balance.push((blocked, -1.0));
            }
            b.p.add_row(format!("bal({f},{i})"), RowSense::Eq, 0.0, balance);
        }
    }

    for &i in &routers {
        let mut ins: Vec<ColId> = (0..net.flows.len()).map(|f| b.reg.col(&Var::FlowRule(f, i))).collect();
        ins.extend((0..net.traffic_types.len()).map(|t| b.reg.col(&Var::TypeRule(t, i))));
        let fw = b.reg.col(&Var::Firewall(i));
        linearize_or(&mut b.p, &format!("W({i})"), fw, &ins);
    }

    for a in &arcs {
        let terms: Vec<(ColId, f64)> = net
            .flows
            .iter()
            .enumerate()
            .map(|(f, flow)| (b.reg.col(&Var::Rho(f, Hop::Device(a.from), Hop::Device(a.to))), flow.quantity))
            .collect();
        b.p.add_row(format!("link({},{})", a.from, a.to), RowSense::Le, a.capacity, terms);
    }
    for (&i, &cap) in &net.device_capacity {
        let mut terms = Vec::new();
        for (f, flow) in net.flows.iter().enumerate() {
            for a in arcs.iter().filter(|a| a.from == i || a.to == i) {
                terms.push((b.reg.col(&Var::Rho(f, Hop::Device(a.from), Hop::Device(a.to))), flow.quantity));
            }
        }
        b.p.add_row(format!("dev({i})"), RowSense::Le, cap, terms);
    }

    let mut conn_col: BTreeMap<&Connection, ColId> = BTreeMap::new();
    let by_conn = net.flows_by_connection();
    for (conn, flows) in &by_conn {
        let t = type_idx[conn.traffic_type.as_str()];
        let n = b.binary(Var::Conn(conn.source, conn.target, t));
        let ins: Vec<ColId> = flows.iter().map(|&f| b.reg.col(&Var::Rho(f, Hop::Device(conn.target), Hop::Sink))).collect();
        linearize_or(&mut b.p, &format!("N({},{},{t})", conn.source, conn.target), n, &ins);
        conn_col.insert(conn, n);
    }

    // Prerequisite arcs of network exploits follow their connection.
    let exploit_conn: BTreeMap<NodeId, &Connection> = asm.connections.iter().map(|(c, &n)| (n, c)).collect();
    let mut states = vec![ArcState::Present; g.edge_count()];
    for (eid, e) in g.edges() {
        if let Some(conn) = exploit_conn.get(&e.head) {
            let a = b.binary(Var::A(e.tail, e.head));
            let n = conn_col[conn];
            b.p.add_row(format!("chan({},{})", e.tail.0, e.head.0), RowSense::Eq, 0.0, [(a, 1.0), (n, -1.0)]);
            states[eid.0] = ArcState::Column(a);
        } else {
            b.fixed(Var::A(e.tail, e.head), 1.0);
        }
    }
    b.attack_block(g, w.epsilon, |e| states[e.0]);
    Ok(b.finish(w))
}

/// Assembles the instance graph and builds the model.
pub fn build_for_instance(inst: &Instance, w: &ModelWeights) -> Result<(AssembledGraph, Model), ModelError> {
    let asm = inst.assemble()?;
    let m = build(&inst.network, &asm, w)?;
    Ok((asm, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, Limits, Status};
    use crate::toy::{toy_instance, toy_weights};

    #[test]
    fn weights_validate() {
        ModelWeights::default().validate().unwrap();
        assert!(ModelWeights { alpha: 1.5, ..Default::default() }.validate().is_err());
        assert!(ModelWeights { epsilon: 0.01, ..Default::default() }.validate().is_err());
        assert!(ModelWeights { alpha2: -1.0, ..Default::default() }.validate().is_err());
        assert!(ModelWeights::from_json(r#"{"alpha": 0.3}"#).unwrap().beta == 0.5);
        assert!(ModelWeights::from_json(r#"{"gamma": 0.3}"#).is_err());
    }

    #[test]
    fn toy_model_is_well_formed() {
        let (_, m) = build_for_instance(&toy_instance(), &toy_weights()).unwrap();
        m.problem.validate().unwrap();
        assert_eq!(m.registry.get(&Var::Rho(0, Hop::Source, Hop::Device(0))).map(|c| m.problem.columns[c.0].lower), Some(1.0));
    }

    #[test]
    fn full_functionality_delivers_everything() {
        let inst = toy_instance();
        let w = toy_weights().with_alpha_beta(1.0, 0.5);
        let (_, m) = build_for_instance(&inst, &w).unwrap();
        let s = solve(&m.problem, &Limits::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        for f in 0..inst.network.flows.len() {
            let dst = inst.network.flows[f].dst;
            let c = m.registry.col(&Var::Rho(f, Hop::Device(dst), Hop::Sink));
            assert_eq!(s.values[c.0], 1.0, "flow {f}");
        }
    }

    #[test]
    fn unaugmented_graph_rejected() {
        let inst = toy_instance();
        let (g, connections) = inst.base_graph().unwrap();
        let asm = AssembledGraph { graph: g, connections };
        assert_eq!(build(&inst.network, &asm, &ModelWeights::default()).unwrap_err(), ModelError::NotAugmented);
    }

    #[test]
    fn isolated_source_is_infeasible_by_construction() {
        let mut inst = toy_instance();
        inst.network.hosts.push(9);
        inst.network.flows.push(crate::network::Flow { src: 9, dst: 3, traffic_type: "A".into(), quantity: 1.0, value: 1.0 });
        assert!(matches!(build_for_instance(&inst, &ModelWeights::default()), Err(ModelError::InfeasibleByConstruction(_))));
    }
}
