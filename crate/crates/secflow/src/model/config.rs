//! Reading a network configuration out of a solved model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Hop, Model, Var};
use crate::attack_graph::DeviceId;
use crate::milp::ColumnKind;
use crate::network::{FlowId, NetworkInstance};

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteEntry {
    pub device: DeviceId,
    pub flow: FlowId,
    pub next_hop: DeviceId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirewallKind {
    Flow,
    Type,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FirewallRule {
    pub device: DeviceId,
    pub kind: FirewallKind,
    /// Flow id for flow rules, traffic type name for type rules.
    pub selector: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    #[serde(rename = "Of")]
    pub of: f64,
    #[serde(rename = "Od")]
    pub od: f64,
    #[serde(rename = "Or")]
    pub or: f64,
    #[serde(rename = "Op")]
    pub op: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    pub routing: Vec<RouteEntry>,
    pub firewalls: Vec<FirewallRule>,
    pub blocked: Vec<FlowId>,
    pub delivered: Vec<FlowId>,
    pub objective_terms: ObjectiveTerms,
}

impl Configuration {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configurations always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn delivered_value(&self, net: &NetworkInstance) -> f64 {
        self.delivered.iter().map(|&f| net.flows[f].value).sum()
    }

    pub fn is_delivered(&self, f: FlowId) -> bool {
        self.delivered.binary_search(&f).is_ok()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("solution has {got} values for {want} columns")]
    WrongLength { got: usize, want: usize },
    #[error("binary column {0} is fractional ({1})")]
    FractionalSolution(String, f64),
}

/// Routing tables, firewall rules and flow outcomes of an integral
/// solution of `model`.
pub fn extract_configuration(net: &NetworkInstance, model: &Model, values: &[f64]) -> Result<Configuration, ConfigError> {
    let p = &model.problem;
    if values.len() != p.columns.len() {
        return Err(ConfigError::WrongLength { got: values.len(), want: p.columns.len() });
    }
    for (c, &v) in p.columns.iter().zip(values) {
        if c.kind == ColumnKind::Binary && (v - v.round()).abs() > INT_TOL {
            return Err(ConfigError::FractionalSolution(c.name.clone(), v));
        }
    }
    let on = |c: crate::milp::ColId| values[c.0] > 0.5;
    let mut routing = Vec::new();
    let mut firewalls = Vec::new();
    let mut blocked = Vec::new();
    let mut delivered = Vec::new();
    for (var, c) in model.registry.iter() {
        if !on(c) {
            continue;
        }
        match *var {
            Var::Rho(f, Hop::Device(i), Hop::Device(j)) => routing.push(RouteEntry { device: i, flow: f, next_hop: j }),
            Var::Rho(f, Hop::Device(_), Hop::Sink) => delivered.push(f),
            Var::Blocked(f, _) => blocked.push(f),
            Var::FlowRule(f, i) => firewalls.push(FirewallRule { device: i, kind: FirewallKind::Flow, selector: f.to_string() }),
            Var::TypeRule(t, i) => {
                firewalls.push(FirewallRule { device: i, kind: FirewallKind::Type, selector: net.traffic_types[t].clone() })
            }
            _ => {}
        }
    }
    routing.sort();
    firewalls.sort();
    blocked.sort_unstable();
    blocked.dedup();
    delivered.sort_unstable();
    Ok(Configuration { routing, firewalls, blocked, delivered, objective_terms: model.terms.evaluate(values) })
}
