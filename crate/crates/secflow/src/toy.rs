//! The six-flow, four-exploit example network used throughout the tests.

use crate::attack_graph::AttackGraph;
use crate::instance::Instance;
use crate::model::ModelWeights;

const TOY_INSTANCE: &str = include_str!("../data/toy_instance.json");
const TOY_WEIGHTS: &str = include_str!("../data/toy_weights.json");

pub fn toy_instance() -> Instance {
    Instance::from_json(TOY_INSTANCE).expect("bundled toy instance parses")
}

/// Toy attack graph (network and vulnerability exploits, no targets).
pub fn toy_attack_graph() -> AttackGraph {
    toy_instance().base_graph().expect("bundled toy instance is valid").0
}

/// Weights used with the toy instance. Type rules are cheaper than
/// flow rules here.
pub fn toy_weights() -> ModelWeights {
    ModelWeights::from_json(TOY_WEIGHTS).expect("bundled toy weights parse")
}
