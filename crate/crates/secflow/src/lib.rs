//! Joint optimization of network routing and attack-graph risk.
//!
//! The crate builds a binary program that routes typed flows through a
//! network while cutting attack paths, solves it with an embedded
//! branch-and-bound, and re-evaluates the resulting configuration with an
//! exact Bayesian risk computation.

pub mod attack_graph;
pub mod benchmark;
pub mod exact_risk;
pub mod instance;
pub mod milp;
pub mod model;
pub mod network;
pub mod oracle;
pub mod pipeline;
pub mod risk_measures;
pub mod toy;

mod scc;
