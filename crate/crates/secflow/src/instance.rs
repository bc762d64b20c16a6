//! A full problem instance: network plus vulnerabilities, and the attack
//! graph assembled from both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::{AttackGraph, Capability, Exploit, ExploitKind, GraphBuilder, GraphError, GraphFile, NodeId};
use crate::network::{Connection, NetworkError, NetworkInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub network: NetworkInstance,
    /// Vulnerability exploits only; network exploits are derived from flows.
    pub vulnerabilities: GraphFile,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("capability {0} refers to unknown device {1}")]
    UnknownDevice(usize, u32),
    #[error("exploit {0} in the vulnerability list must have kind \"vulnerability\"")]
    UnexpectedExploitKind(usize),
}

/// Attack graph for an instance, with the node of every network exploit.
#[derive(Clone, Debug)]
pub struct AssembledGraph {
    /// Graph augmented with target exploits.
    pub graph: AttackGraph,
    pub connections: BTreeMap<Connection, NodeId>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances always serialize")
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        self.network.validate()?;
        let devices = self.network.devices();
        for (i, c) in self.vulnerabilities.capabilities.iter().enumerate() {
            if devices.binary_search(&c.device).is_err() {
                return Err(InstanceError::UnknownDevice(i, c.device));
            }
        }
        for (i, e) in self.vulnerabilities.exploits.iter().enumerate() {
            if e.exploit.kind != ExploitKind::Vulnerability {
                return Err(InstanceError::UnexpectedExploitKind(i));
            }
        }
        Ok(())
    }

    /// Attack graph with vulnerability exploits and one network exploit per
    /// realized connection, before target augmentation.
    ///
    /// A connection `k -> h : t` gets prerequisites every capability on `k`
    /// with privilege at least 1 and grants `(h, 0:t)`, created with impact 0
    /// when the vulnerability list lacks it. Connections whose source holds
    /// no such capability cannot be used by the attacker and are skipped.
    pub fn base_graph(&self) -> Result<(AttackGraph, BTreeMap<Connection, NodeId>), InstanceError> {
        self.validate()?;
        let vul = &self.vulnerabilities;
        let mut b = GraphBuilder::new();
        let mut caps: Vec<Capability> = vul.capabilities.clone();
        let mut ids: Vec<NodeId> = caps.iter().map(|c| b.capability(c.clone())).collect();
        let cap_node = |i: usize, ids: &[NodeId]| ids.get(i).copied().ok_or(GraphError::UnknownCapability(i));
        for rec in &vul.exploits {
            let ex = b.exploit(rec.exploit.clone());
            for &p in &rec.preconditions {
                b.edge(cap_node(p, &ids)?, ex);
            }
            for &g in &rec.grants {
                b.edge(ex, cap_node(g, &ids)?);
            }
        }
        for &s in &vul.start {
            b.start(cap_node(s, &ids)?);
        }

        let mut connections = BTreeMap::new();
        for conn in self.network.derive_reachability_exploits() {
            let prereqs: Vec<NodeId> =
                caps.iter().zip(&ids).filter(|(c, _)| c.device == conn.source && c.privilege >= 1).map(|(_, &id)| id).collect();
            if prereqs.is_empty() {
                continue;
            }
            let granted = caps
                .iter()
                .position(|c| c.device == conn.target && c.privilege == 0 && c.traffic_type.as_deref() == Some(&conn.traffic_type));
            let granted = match granted {
                Some(i) => ids[i],
                None => {
                    let c = Capability::reach(conn.target, conn.traffic_type.clone(), 0.0);
                    caps.push(c.clone());
                    let id = b.capability(c);
                    ids.push(id);
                    id
                }
            };
            let ex = b.exploit(Exploit::network(conn.target, conn.traffic_type.clone(), 1.0));
            for p in prereqs {
                b.edge(p, ex);
            }
            b.edge(ex, granted);
            connections.insert(conn, ex);
        }
        Ok((b.build()?, connections))
    }

    pub fn assemble(&self) -> Result<AssembledGraph, InstanceError> {
        let (base, connections) = self.base_graph()?;
        Ok(AssembledGraph { graph: base.with_targets(), connections })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::toy_instance;

    #[test]
    fn toy_assembles_with_six_network_exploits() {
        let inst = toy_instance();
        let asm = inst.assemble().unwrap();
        assert_eq!(asm.connections.len(), 6);
        // (3,1), (5,1), (6,1), (4,1) have positive impact.
        assert_eq!(asm.graph.predecessors(AttackGraph::MU).unwrap().len(), 4);
    }

    #[test]
    fn connection_without_attacker_foothold_is_skipped() {
        let mut inst = toy_instance();
        inst.network.hosts.push(7);
        inst.network.links.push(crate::network::Link { a: 7, b: 1, capacity: 1000.0, cost: None });
        inst.network.flows.push(crate::network::Flow { src: 7, dst: 3, traffic_type: "A".into(), quantity: 1.0, value: 1.0 });
        let (_, conns) = inst.base_graph().unwrap();
        assert_eq!(conns.len(), 6);
        assert!(!conns.keys().any(|c| c.source == 7));
    }

    #[test]
    fn missing_reach_capability_is_created() {
        let mut inst = toy_instance();
        inst.network.flows.push(crate::network::Flow { src: 0, dst: 6, traffic_type: "B".into(), quantity: 1.0, value: 1.0 });
        let (g, _) = inst.base_graph().unwrap();
        assert!(g.find_capability(6, 0, Some("B")).is_some());
    }

    #[test]
    fn vulnerability_list_rejects_network_kind() {
        let mut inst = toy_instance();
        inst.vulnerabilities.exploits[0].exploit.kind = ExploitKind::Network;
        assert_eq!(inst.validate(), Err(InstanceError::UnexpectedExploitKind(0)));
    }

    #[test]
    fn capability_on_unknown_device() {
        let mut inst = toy_instance();
        inst.vulnerabilities.capabilities[1].device = 99;
        assert_eq!(inst.validate(), Err(InstanceError::UnknownDevice(1, 99)));
    }
}
