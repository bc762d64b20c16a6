//! Network side of the problem: devices, links and typed flows.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::DeviceId;

/// Cost of one directed arc when a link has no explicit cost.
pub const DEFAULT_LINK_COST: f64 = 1.0;

/// Bidirectional link; expanded into two independent directed arcs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub a: DeviceId,
    pub b: DeviceId,
    pub capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub src: DeviceId,
    pub dst: DeviceId,
    #[serde(rename = "type")]
    pub traffic_type: String,
    pub quantity: f64,
    pub value: f64,
}

/// Index of a flow inside [`NetworkInstance::flows`].
pub type FlowId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkInstance {
    pub routers: Vec<DeviceId>,
    pub hosts: Vec<DeviceId>,
    pub gateways: Vec<DeviceId>,
    pub links: Vec<Link>,
    pub traffic_types: Vec<String>,
    pub flows: Vec<Flow>,
    /// Throughput limit per router; routers missing here are unbounded.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub device_capacity: BTreeMap<DeviceId, f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("device {0} is declared more than once")]
    DuplicateDevice(DeviceId),
    #[error("gateway {0} is not a router")]
    GatewayNotRouter(DeviceId),
    #[error("capacity {value} on {what} must be positive")]
    NonPositiveCapacity { what: String, value: f64 },
    #[error("link cost {0} must be finite and non-negative")]
    BadCost(f64),
    #[error("link {0}-{1} connects a device to itself")]
    SelfLoopLink(DeviceId, DeviceId),
    #[error("flow {0} has the same source and destination")]
    SelfLoopFlow(FlowId),
    #[error("flow {flow} uses undeclared traffic type {traffic_type:?}")]
    UnknownTrafficType { flow: FlowId, traffic_type: String },
    #[error("flow {flow}: quantity {quantity} must be positive and value {value} non-negative")]
    BadFlowAmount { flow: FlowId, quantity: f64, value: f64 },
    #[error("flow {0} must start and end at a host or gateway")]
    BadEndpoint(FlowId),
}

/// Directed arc between two devices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub from: DeviceId,
    pub to: DeviceId,
    pub capacity: f64,
    pub cost: f64,
}

/// A realized network connection: traffic of `traffic_type` from `source`
/// can reach host `target`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub source: DeviceId,
    pub target: DeviceId,
    pub traffic_type: String,
}

impl NetworkInstance {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut seen = BTreeSet::new();
        for &d in self.routers.iter().chain(&self.hosts) {
            if !seen.insert(d) {
                return Err(NetworkError::DuplicateDevice(d));
            }
        }
        let routers: BTreeSet<_> = self.routers.iter().copied().collect();
        for &g in &self.gateways {
            if !routers.contains(&g) {
                return Err(NetworkError::GatewayNotRouter(g));
            }
        }
        for l in &self.links {
            for d in [l.a, l.b] {
                if !seen.contains(&d) {
                    return Err(NetworkError::UnknownDevice(d));
                }
            }
            if l.a == l.b {
                return Err(NetworkError::SelfLoopLink(l.a, l.b));
            }
            if !(l.capacity > 0.0) {
                return Err(NetworkError::NonPositiveCapacity { what: format!("link {}-{}", l.a, l.b), value: l.capacity });
            }
            if let Some(c) = l.cost {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(NetworkError::BadCost(c));
                }
            }
        }
        for (&d, &k) in &self.device_capacity {
            if !routers.contains(&d) {
                return Err(NetworkError::UnknownDevice(d));
            }
            if !(k > 0.0) {
                return Err(NetworkError::NonPositiveCapacity { what: format!("device {d}"), value: k });
            }
        }
        let types: BTreeSet<&str> = self.traffic_types.iter().map(String::as_str).collect();
        let endpoints: BTreeSet<_> = self.hosts.iter().chain(&self.gateways).copied().collect();
        for (i, f) in self.flows.iter().enumerate() {
            for d in [f.src, f.dst] {
                if !seen.contains(&d) {
                    return Err(NetworkError::UnknownDevice(d));
                }
                if !endpoints.contains(&d) {
                    return Err(NetworkError::BadEndpoint(i));
                }
            }
            if f.src == f.dst {
                return Err(NetworkError::SelfLoopFlow(i));
            }
            if !types.contains(f.traffic_type.as_str()) {
                return Err(NetworkError::UnknownTrafficType { flow: i, traffic_type: f.traffic_type.clone() });
            }
            if !(f.quantity > 0.0 && f.quantity.is_finite() && f.value >= 0.0 && f.value.is_finite()) {
                return Err(NetworkError::BadFlowAmount { flow: i, quantity: f.quantity, value: f.value });
            }
        }
        Ok(())
    }

    pub fn is_host(&self, d: DeviceId) -> bool {
        self.hosts.contains(&d)
    }

    pub fn is_router(&self, d: DeviceId) -> bool {
        self.routers.contains(&d)
    }

    pub fn is_gateway(&self, d: DeviceId) -> bool {
        self.gateways.contains(&d)
    }

    /// Every link in both directions, sorted by `(from, to)`. Parallel
    /// links between the same pair are merged by adding capacities.
    pub fn arcs(&self) -> Vec<Arc> {
        let mut map: BTreeMap<(DeviceId, DeviceId), Arc> = BTreeMap::new();
        for l in &self.links {
            let cost = l.cost.unwrap_or(DEFAULT_LINK_COST);
            for (from, to) in [(l.a, l.b), (l.b, l.a)] {
                map.entry((from, to)).and_modify(|arc| arc.capacity += l.capacity).or_insert(Arc { from, to, capacity: l.capacity, cost });
            }
        }
        map.into_values().collect()
    }

    /// All devices, sorted.
    pub fn devices(&self) -> Vec<DeviceId> {
        let mut d: Vec<_> = self.routers.iter().chain(&self.hosts).copied().collect();
        d.sort_unstable();
        d
    }

    /// The connection a flow realizes when delivered, if its destination is
    /// a host (connections towards gateways carry no attack surface).
    pub fn connection_of(&self, f: FlowId) -> Option<Connection> {
        let flow = &self.flows[f];
        self.is_host(flow.dst).then(|| Connection { source: flow.src, target: flow.dst, traffic_type: flow.traffic_type.clone() })
    }

    /// One network-reachability exploit per connection some flow realizes.
    pub fn derive_reachability_exploits(&self) -> BTreeSet<Connection> {
        (0..self.flows.len()).filter_map(|f| self.connection_of(f)).collect()
    }

    /// Flows grouped by the connection they realize.
    pub fn flows_by_connection(&self) -> BTreeMap<Connection, Vec<FlowId>> {
        let mut map: BTreeMap<Connection, Vec<FlowId>> = BTreeMap::new();
        for f in 0..self.flows.len() {
            if let Some(c) = self.connection_of(f) {
                map.entry(c).or_default().push(f);
            }
        }
        map
    }

    pub fn total_value(&self) -> f64 {
        self.flows.iter().map(|f| f.value).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> NetworkInstance {
        crate::toy::toy_instance().network
    }

    #[test]
    fn toy_is_valid() {
        let n = toy();
        assert_eq!(n.routers.len(), 3);
        assert_eq!(n.hosts.len(), 4);
        assert_eq!(n.flows.len(), 6);
        n.validate().unwrap();
        n.validate().unwrap();
    }

    #[test]
    fn self_loop_flow() {
        let mut n = toy();
        n.flows[2].dst = n.flows[2].src;
        assert_eq!(n.validate(), Err(NetworkError::SelfLoopFlow(2)));
    }

    #[test]
    fn link_to_unknown_device() {
        let mut n = toy();
        n.links.push(Link { a: 0, b: 77, capacity: 10.0, cost: None });
        assert_eq!(n.validate(), Err(NetworkError::UnknownDevice(77)));
    }

    #[test]
    fn non_positive_capacity() {
        let mut n = toy();
        n.links[0].capacity = 0.0;
        assert!(matches!(n.validate(), Err(NetworkError::NonPositiveCapacity { .. })));
        let mut n = toy();
        n.device_capacity.insert(1, -5.0);
        assert!(matches!(n.validate(), Err(NetworkError::NonPositiveCapacity { .. })));
    }

    #[test]
    fn gateway_must_be_router() {
        let mut n = toy();
        n.gateways.push(3);
        assert_eq!(n.validate(), Err(NetworkError::GatewayNotRouter(3)));
    }

    #[test]
    fn toy_reachability_exploits() {
        let got: Vec<(u32, u32, String)> =
            toy().derive_reachability_exploits().into_iter().map(|c| (c.source, c.target, c.traffic_type)).collect();
        let want: Vec<(u32, u32, String)> = [(0, 3, "A"), (3, 4, "A"), (3, 4, "B"), (3, 5, "A"), (3, 5, "B"), (5, 6, "A")]
            .into_iter()
            .map(|(a, b, t)| (a, b, t.to_string()))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn no_flows_no_exploits() {
        let mut n = toy();
        n.flows.clear();
        assert!(n.derive_reachability_exploits().is_empty());
    }

    #[test]
    fn duplicate_flows_share_one_exploit() {
        let mut n = toy();
        let dup = n.flows[0].clone();
        n.flows.push(dup);
        assert_eq!(n.derive_reachability_exploits().len(), 6);
        assert!(n.derive_reachability_exploits().len() <= n.flows.len());
    }

    #[test]
    fn arcs_are_doubled_with_default_cost() {
        let n = toy();
        let arcs = n.arcs();
        assert_eq!(arcs.len(), 2 * n.links.len());
        assert!(arcs.iter().all(|a| a.cost == DEFAULT_LINK_COST));
        assert!(arcs.windows(2).all(|w| (w[0].from, w[0].to) < (w[1].from, w[1].to)));
    }

    #[test]
    fn json_round_trip() {
        let n = toy();
        let text = serde_json::to_string(&n).unwrap();
        assert_eq!(NetworkInstance::from_json(&text).unwrap(), n);
    }
}
