//! Typed keys for model columns.

use std::collections::BTreeMap;
use std::fmt;

use crate::attack_graph::{DeviceId, NodeId};
use crate::milp::ColId;
use crate::network::FlowId;

/// Endpoint of a flow arc: a device or one of the artificial terminals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hop {
    Source,
    Device(DeviceId),
    Sink,
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hop::Source => write!(f, "s"),
            Hop::Device(d) => write!(f, "{d}"),
            Hop::Sink => write!(f, "t"),
        }
    }
}

/// Traffic types are referred to by their position in the instance list.
pub type TypeIdx = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Flow `f` uses arc `(i, j)`.
    Rho(FlowId, Hop, Hop),
    /// Flow `f` stops at router `i`.
    Blocked(FlowId, DeviceId),
    /// Flow-specific firewall rule for `f` at `i`.
    FlowRule(FlowId, DeviceId),
    /// Type firewall for type `t` at `i`.
    TypeRule(TypeIdx, DeviceId),
    /// Router `i` runs any firewall rule.
    Firewall(DeviceId),
    /// Connection `k -> h` of type `t` is live.
    Conn(DeviceId, DeviceId, TypeIdx),
    /// Flow `f` is dropped at `i` by a type rule.
    TypeBlock(FlowId, DeviceId),
    /// Flow `f` arrives at `i`.
    Recv(FlowId, DeviceId),
    /// Attack-graph node is reachable.
    R(NodeId),
    /// Attack-graph arc is present.
    A(NodeId, NodeId),
    /// Attack-graph arc is enabled and its tail reachable.
    X(NodeId, NodeId),
    /// Dual potential of a node on the path block.
    Y(NodeId),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Rho(fl, i, j) => write!(f, "rho({fl},{i},{j})"),
            Var::Blocked(fl, i) => write!(f, "b({fl},{i})"),
            Var::FlowRule(fl, i) => write!(f, "w({fl},{i})"),
            Var::TypeRule(t, i) => write!(f, "v({t},{i})"),
            Var::Firewall(i) => write!(f, "W({i})"),
            Var::Conn(k, h, t) => write!(f, "N({k},{h},{t})"),
            Var::TypeBlock(fl, i) => write!(f, "beta({fl},{i})"),
            Var::Recv(fl, i) => write!(f, "theta({fl},{i})"),
            Var::R(n) => write!(f, "r({})", n.0),
            Var::A(t, h) => write!(f, "a({},{})", t.0, h.0),
            Var::X(t, h) => write!(f, "x({},{})", t.0, h.0),
            Var::Y(n) => write!(f, "y({})", n.0),
        }
    }
}

/// Map from variable to column. Some keys share a column (an arc that is
/// always present has `x` equal to `r` of its tail).
#[derive(Clone, Debug, Default)]
pub struct VariableRegistry {
    map: BTreeMap<Var, ColId>,
}

impl VariableRegistry {
    pub fn insert(&mut self, v: Var, c: ColId) {
        let old = self.map.insert(v, c);
        assert!(old.is_none(), "variable {v} registered twice");
    }

    pub fn get(&self, v: &Var) -> Option<ColId> {
        self.map.get(v).copied()
    }

    /// Column of `v`; panics if it was never created.
    pub fn col(&self, v: &Var) -> ColId {
        self.get(v).unwrap_or_else(|| panic!("no column for {v}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, ColId)> {
        self.map.iter().map(|(v, &c)| (v, c))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_lp_friendly() {
        let v = Var::Rho(3, Hop::Source, Hop::Device(7));
        assert_eq!(v.to_string(), "rho(3,s,7)");
        assert_eq!(Var::A(NodeId(2), NodeId(5)).to_string(), "a(2,5)");
    }

    #[test]
    #[should_panic(expected = "registered twice")]
    fn duplicate_registration_panics() {
        let mut r = VariableRegistry::default();
        r.insert(Var::Firewall(1), ColId(0));
        r.insert(Var::Firewall(1), ColId(1));
    }
}
