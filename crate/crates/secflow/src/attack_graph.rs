//! Attack dependency graphs.
//!
//! A graph alternates capability nodes (an attacker state on a device) and
//! exploit nodes (a transition that consumes prerequisite capabilities and
//! grants new ones). Two artificial nodes are always present: the source
//! `sigma`, which feeds every start capability, and the target `mu`, which
//! only receives edges once [`AttackGraph::augment_with_targets`] has added
//! one auxiliary exploit per valuable capability.
//!
//! Node ids are dense and stable: `sigma` is 0, `mu` is 1 and the remaining
//! nodes follow in insertion order. Adjacency lists are kept sorted by node
//! id so every traversal in the crate is reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a network device (router or host).
pub type DeviceId = u32;

/// Dense node identifier inside one [`AttackGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

/// Dense edge identifier inside one [`AttackGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Highest privilege level a capability can carry.
pub const MAX_PRIVILEGE: u8 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub device: DeviceId,
    pub privilege: u8,
    /// Only privilege-0 (network reachability) capabilities carry a type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_type: Option<String>,
    pub impact: f64,
}

impl Capability {
    pub fn new(device: DeviceId, privilege: u8, impact: f64) -> Self {
        Capability { device, privilege, traffic_type: None, impact }
    }

    /// A privilege-0 capability: the attacker can send `traffic_type` to `device`.
    pub fn reach(device: DeviceId, traffic_type: impl Into<String>, impact: f64) -> Self {
        Capability { device, privilege: 0, traffic_type: Some(traffic_type.into()), impact }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.traffic_type {
            Some(t) => write!(f, "({},{}:{})", self.device, self.privilege, t),
            None => write!(f, "({},{})", self.device, self.privilege),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExploitKind {
    /// An active network connection towards a host.
    Network,
    /// A software or configuration vulnerability.
    Vulnerability,
    /// Auxiliary exploit linking a capability to the target node `mu`.
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Logic {
    And,
    Or,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploit {
    pub kind: ExploitKind,
    pub logic: Logic,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_device: Option<DeviceId>,
}

impl Exploit {
    pub fn vulnerability(logic: Logic, probability: f64) -> Self {
        Exploit { kind: ExploitKind::Vulnerability, logic, probability, traffic_type: None, target_device: None }
    }

    /// Network reachability exploit: connections are always OR nodes.
    pub fn network(target_device: DeviceId, traffic_type: impl Into<String>, probability: f64) -> Self {
        Exploit {
            kind: ExploitKind::Network,
            logic: Logic::Or,
            probability,
            traffic_type: Some(traffic_type.into()),
            target_device: Some(target_device),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Source,
    Target,
    Capability(Capability),
    Exploit(Exploit),
}

impl Node {
    pub fn as_capability(&self) -> Option<&Capability> {
        match self {
            Node::Capability(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_exploit(&self) -> Option<&Exploit> {
        match self {
            Node::Exploit(e) => Some(e),
            _ => None,
        }
    }

    /// True for nodes that behave as capabilities (OR over predecessors,
    /// weight 1 on inbound edges): real capabilities and `mu`.
    pub fn is_capability_like(&self) -> bool {
        matches!(self, Node::Capability(_) | Node::Target)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// `sigma` to a start capability.
    Start,
    /// Capability to exploit.
    Prerequisite,
    /// Exploit to granted capability.
    Grant,
    /// Auxiliary target exploit to `mu`.
    Goal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub kind: EdgeKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {tail} -> {head} does not alternate capability and exploit nodes")]
    BipartiteViolation { tail: NodeId, head: NodeId },
    #[error("edge {tail} -> {head} references a node that does not exist")]
    DanglingEdge { tail: NodeId, head: NodeId },
    #[error("capability index {0} does not exist")]
    UnknownCapability(usize),
    #[error("the start set is empty")]
    EmptyStart,
    #[error("start node {0} is not a capability")]
    StartNotCapability(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("exploit {0} has no prerequisite")]
    MissingPrerequisite(NodeId),
    #[error("exploit {0} grants nothing")]
    MissingGrant(NodeId),
    #[error("exploit {node} has probability {probability}, expected a value in (0, 1]")]
    BadProbability { node: NodeId, probability: f64 },
    #[error("capability {node} has impact {impact}, expected a finite value >= 0")]
    BadImpact { node: NodeId, impact: f64 },
    #[error("capability {0}: privilege must be in 0..=2 and carry a traffic type exactly when it is 0")]
    BadPrivilege(NodeId),
    #[error("network exploit {0} must be an OR node with a traffic type and target device")]
    BadNetworkExploit(NodeId),
    #[error("target exploit {0} can only be added through augment_with_targets")]
    UnexpectedTargetExploit(NodeId),
    #[error("normalized impact for {node} is {value}, expected a value in (0, 1]")]
    BadNormalizedImpact { node: NodeId, value: f64 },
}

/// Incremental constructor; [`GraphBuilder::build`] validates everything.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    start: Vec<NodeId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder { nodes: vec![Node::Source, Node::Target], edges: Vec::new(), start: Vec::new() }
    }

    pub fn capability(&mut self, c: Capability) -> NodeId {
        self.nodes.push(Node::Capability(c));
        NodeId(self.nodes.len() - 1)
    }

    pub fn exploit(&mut self, e: Exploit) -> NodeId {
        self.nodes.push(Node::Exploit(e));
        NodeId(self.nodes.len() - 1)
    }

    /// Adds a prerequisite (capability to exploit) or grant (exploit to
    /// capability) edge. Direction decides which.
    pub fn edge(&mut self, tail: NodeId, head: NodeId) -> &mut Self {
        self.edges.push((tail, head));
        self
    }

    pub fn start(&mut self, c: NodeId) -> &mut Self {
        self.start.push(c);
        self
    }

    pub fn build(self) -> Result<AttackGraph, GraphError> {
        let GraphBuilder { nodes, edges, start } = self;
        let n = nodes.len();
        let mut edge_set = BTreeSet::new();
        for &(tail, head) in &edges {
            if tail.0 >= n || head.0 >= n {
                return Err(GraphError::DanglingEdge { tail, head });
            }
            let kind = match (&nodes[tail.0], &nodes[head.0]) {
                (Node::Capability(_), Node::Exploit(_)) => EdgeKind::Prerequisite,
                (Node::Exploit(_), Node::Capability(_)) => EdgeKind::Grant,
                _ => return Err(GraphError::BipartiteViolation { tail, head }),
            };
            edge_set.insert((tail, head, kind));
        }
        if start.is_empty() {
            return Err(GraphError::EmptyStart);
        }
        let mut start_set = BTreeSet::new();
        for &s in &start {
            match nodes.get(s.0) {
                None => return Err(GraphError::UnknownNode(s)),
                Some(Node::Capability(_)) => {
                    start_set.insert(s);
                }
                Some(_) => return Err(GraphError::StartNotCapability(s)),
            }
        }
        for &s in &start_set {
            edge_set.insert((AttackGraph::SIGMA, s, EdgeKind::Start));
        }
        let mut all_edges: Vec<Edge> = edge_set.into_iter().map(|(tail, head, kind)| Edge { tail, head, kind }).collect();
        // Sorted by (tail, head): stable edge ids.
        all_edges.sort_by_key(|e| (e.tail, e.head));
        let g = AttackGraph::from_parts(nodes, all_edges, start_set.into_iter().collect());
        g.validate_nodes()?;
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    in_edges: Vec<Vec<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
    start: Vec<NodeId>,
}

impl AttackGraph {
    pub const SIGMA: NodeId = NodeId(0);
    pub const MU: NodeId = NodeId(1);

    fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>, start: Vec<NodeId>) -> Self {
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut out_edges = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.tail.0].push(EdgeId(i));
            in_edges[e.head.0].push(EdgeId(i));
        }
        for list in in_edges.iter_mut() {
            list.sort_by_key(|&id| edges[id.0].tail);
        }
        for list in out_edges.iter_mut() {
            list.sort_by_key(|&id| edges[id.0].head);
        }
        AttackGraph { nodes, edges, in_edges, out_edges, start }
    }

    fn validate_nodes(&self) -> Result<(), GraphError> {
        for (i, node) in self.nodes.iter().enumerate() {
            let id = NodeId(i);
            match node {
                Node::Capability(c) => {
                    if !(c.impact.is_finite() && c.impact >= 0.0) {
                        return Err(GraphError::BadImpact { node: id, impact: c.impact });
                    }
                    if c.privilege > MAX_PRIVILEGE || (c.privilege == 0) != c.traffic_type.is_some() {
                        return Err(GraphError::BadPrivilege(id));
                    }
                }
                Node::Exploit(e) => {
                    if !(e.probability > 0.0 && e.probability <= 1.0) {
                        return Err(GraphError::BadProbability { node: id, probability: e.probability });
                    }
                    if e.kind == ExploitKind::Network && (e.logic != Logic::Or || e.traffic_type.is_none() || e.target_device.is_none()) {
                        return Err(GraphError::BadNetworkExploit(id));
                    }
                    if e.kind == ExploitKind::Target {
                        return Err(GraphError::UnexpectedTargetExploit(id));
                    }
                    if self.in_edges[i].is_empty() {
                        return Err(GraphError::MissingPrerequisite(id));
                    }
                    if self.out_edges[i].is_empty() {
                        return Err(GraphError::MissingGrant(id));
                    }
                }
                Node::Source | Node::Target => {}
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id.0]
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, Edge)> + '_ {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeId(i), *e))
    }

    pub fn find_edge(&self, tail: NodeId, head: NodeId) -> Option<EdgeId> {
        self.out_edges.get(tail.0)?.iter().copied().find(|&e| self.edges[e.0].head == head)
    }

    pub fn in_edges(&self, id: NodeId) -> &[EdgeId] {
        &self.in_edges[id.0]
    }

    pub fn out_edges(&self, id: NodeId) -> &[EdgeId] {
        &self.out_edges[id.0]
    }

    pub fn start(&self) -> &[NodeId] {
        &self.start
    }

    pub fn is_start(&self, id: NodeId) -> bool {
        self.start.binary_search(&id).is_ok()
    }

    pub fn capabilities(&self) -> impl Iterator<Item = (NodeId, &Capability)> {
        self.nodes().filter_map(|(id, n)| n.as_capability().map(|c| (id, c)))
    }

    pub fn exploits(&self) -> impl Iterator<Item = (NodeId, &Exploit)> {
        self.nodes().filter_map(|(id, n)| n.as_exploit().map(|e| (id, e)))
    }

    pub fn find_capability(&self, device: DeviceId, privilege: u8, traffic_type: Option<&str>) -> Option<NodeId> {
        self.capabilities()
            .find(|(_, c)| c.device == device && c.privilege == privilege && c.traffic_type.as_deref() == traffic_type)
            .map(|(id, _)| id)
    }

    /// Probability carried by an edge entering `head`: the exploit
    /// probability for exploit heads, 1 for capabilities and `mu`.
    pub fn head_weight(&self, head: NodeId) -> f64 {
        match &self.nodes[head.0] {
            Node::Exploit(e) => e.probability,
            _ => 1.0,
        }
    }

    pub fn predecessors(&self, id: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let list = self.in_edges.get(id.0).ok_or(GraphError::UnknownNode(id))?;
        Ok(list.iter().map(|e| self.edges[e.0].tail).collect())
    }

    pub fn successors(&self, id: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let list = self.out_edges.get(id.0).ok_or(GraphError::UnknownNode(id))?;
        Ok(list.iter().map(|e| self.edges[e.0].head).collect())
    }

    pub fn is_augmented(&self) -> bool {
        !self.in_edges[Self::MU.0].is_empty()
    }

    /// Impacts divided by the largest impact, for capabilities with positive
    /// impact only.
    pub fn normalized_impacts(&self) -> BTreeMap<NodeId, f64> {
        let max = self.capabilities().map(|(_, c)| c.impact).fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return BTreeMap::new();
        }
        self.capabilities().filter(|(_, c)| c.impact > 0.0).map(|(id, c)| (id, c.impact / max)).collect()
    }

    /// Returns a copy with one auxiliary OR exploit per entry of
    /// `normalized`, each taking the capability as prerequisite, carrying
    /// probability `Λ` and granting `mu`. Existing nodes and edge ids are
    /// left untouched; new edges get the next ids.
    pub fn augment_with_targets(&self, normalized: &BTreeMap<NodeId, f64>) -> Result<AttackGraph, GraphError> {
        let mut nodes = self.nodes.clone();
        let mut edges = self.edges.clone();
        for (&cap, &value) in normalized {
            match self.nodes.get(cap.0) {
                Some(Node::Capability(_)) => {}
                Some(_) => return Err(GraphError::BipartiteViolation { tail: cap, head: Self::MU }),
                None => return Err(GraphError::UnknownNode(cap)),
            }
            if !(value > 0.0 && value <= 1.0) {
                return Err(GraphError::BadNormalizedImpact { node: cap, value });
            }
            nodes.push(Node::Exploit(Exploit {
                kind: ExploitKind::Target,
                logic: Logic::Or,
                probability: value,
                traffic_type: None,
                target_device: None,
            }));
            let ex = NodeId(nodes.len() - 1);
            edges.push(Edge { tail: cap, head: ex, kind: EdgeKind::Prerequisite });
            edges.push(Edge { tail: ex, head: Self::MU, kind: EdgeKind::Goal });
        }
        Ok(AttackGraph::from_parts(nodes, edges, self.start.clone()))
    }

    /// [`Self::augment_with_targets`] with max-normalized impacts.
    pub fn with_targets(&self) -> AttackGraph {
        self.augment_with_targets(&self.normalized_impacts()).expect("max-normalized impacts are always in (0, 1]")
    }

    /// Serializable description; target exploits are omitted.
    pub fn to_file(&self) -> GraphFile {
        let mut cap_index = BTreeMap::new();
        let mut capabilities = Vec::new();
        for (id, c) in self.capabilities() {
            cap_index.insert(id, capabilities.len());
            capabilities.push(c.clone());
        }
        let mut exploits = Vec::new();
        for (id, e) in self.exploits() {
            if e.kind == ExploitKind::Target {
                continue;
            }
            let preconditions = self.in_edges[id.0].iter().map(|&ed| cap_index[&self.edges[ed.0].tail]).collect();
            let grants = self.out_edges[id.0].iter().map(|&ed| cap_index[&self.edges[ed.0].head]).collect();
            exploits.push(ExploitRecord { exploit: e.clone(), preconditions, grants });
        }
        let start = self.start.iter().map(|s| cap_index[s]).collect();
        GraphFile { capabilities, exploits, start }
    }
}

/// JSON form of an attack graph. Exploits reference capabilities by their
/// position in `capabilities`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub capabilities: Vec<Capability>,
    pub exploits: Vec<ExploitRecord>,
    pub start: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploitRecord {
    #[serde(flatten)]
    pub exploit: Exploit,
    pub preconditions: Vec<usize>,
    pub grants: Vec<usize>,
}

impl GraphFile {
    pub fn from_json(text: &str) -> Result<GraphFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph files always serialize")
    }

    pub fn build(&self) -> Result<AttackGraph, GraphError> {
        let mut b = GraphBuilder::new();
        let caps: Vec<NodeId> = self.capabilities.iter().map(|c| b.capability(c.clone())).collect();
        let cap = |i: usize| caps.get(i).copied().ok_or(GraphError::UnknownCapability(i));
        for rec in &self.exploits {
            let ex = b.exploit(rec.exploit.clone());
            for &p in &rec.preconditions {
                b.edge(cap(p)?, ex);
            }
            for &g in &rec.grants {
                b.edge(ex, cap(g)?);
            }
        }
        for &s in &self.start {
            b.start(cap(s)?);
        }
        b.build()
    }
}
