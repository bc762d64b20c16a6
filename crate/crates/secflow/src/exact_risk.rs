//! Exact cumulative risk by Bayesian propagation over the attack graph.
//!
//! Scores follow the usual independence reading: an AND exploit fires with
//! `p * prod(P(pred))`, an OR exploit with `p * bayes(P(pred))` and a
//! capability is held with `bayes(P(pred))`. Start capabilities and the
//! source are pinned to 1.
//!
//! Cycles are resolved per strongly connected component, in topological
//! order of the condensation:
//!
//! * a component with no entry point is unreachable and scores 0;
//! * every entry `x` is first scored on the component with the out-edges
//!   of `x` removed, so `x` cannot feed itself;
//! * entries are then pinned to those scores, their inbound edges from
//!   inside the component are dropped, and the remainder is solved again.
//!
//! With a single entry this reduces to dropping the edges that close the
//! cycle. Entries are handled in ascending id order. Results for a
//! component are memoized on the full state they depend on (cut set,
//! pinned values and inbound values), so repeated sub-problems are solved
//! once per evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::attack_graph::{AttackGraph, EdgeId, Logic, Node, NodeId};
use crate::scc::tarjan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
}

/// Independent-union probability `1 - prod(1 - p)`; 0 for an empty list.
pub fn bayes(probs: &[f64]) -> Result<f64, RiskError> {
    if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(RiskError::OutOfRange(bad));
    }
    Ok(bayes_unchecked(probs.iter().copied()))
}

fn bayes_unchecked(probs: impl Iterator<Item = f64>) -> f64 {
    1.0 - probs.fold(1.0, |acc, p| acc * (1.0 - p))
}

/// Per-node probability of being reached by the attacker.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeScores {
    values: Vec<f64>,
}

impl CumulativeScores {
    pub fn get(&self, id: NodeId) -> f64 {
        self.values[id.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (NodeId(i), v))
    }
}

pub fn arisk(g: &AttackGraph) -> CumulativeScores {
    arisk_with_severed(g, &BTreeSet::new())
}

/// Scores on `g` with the `severed` edges removed. Removed prerequisites
/// count as probability 0, so an AND exploit losing one can never fire.
pub fn arisk_with_severed(g: &AttackGraph, severed: &BTreeSet<EdgeId>) -> CumulativeScores {
    let n = g.node_count();
    let mut active = vec![true; g.edge_count()];
    for e in severed {
        if let Some(slot) = active.get_mut(e.0) {
            *slot = false;
        }
    }
    let mut fixed = BTreeMap::new();
    fixed.insert(AttackGraph::SIGMA.0, 1.0);
    for s in g.start() {
        fixed.insert(s.0, 1.0);
    }
    let mut eval = Evaluator { g, active, memo: HashMap::new(), slot: vec![usize::MAX; n], max_depth: 2 * n + 2 };
    let mut vals = vec![0.0; n];
    let all: Vec<usize> = (0..n).collect();
    eval.region(&all, &BTreeSet::new(), &fixed, &mut vals, 0);
    CumulativeScores { values: vals }
}

/// `sum P(c) * impact(c)` over capabilities.
pub fn risk(g: &AttackGraph) -> f64 {
    risk_from_scores(g, &arisk(g))
}

pub fn risk_with_severed(g: &AttackGraph, severed: &BTreeSet<EdgeId>) -> f64 {
    risk_from_scores(g, &arisk_with_severed(g, severed))
}

pub fn risk_from_scores(g: &AttackGraph, scores: &CumulativeScores) -> f64 {
    g.capabilities().map(|(id, c)| scores.get(id) * c.impact).sum()
}

type MemoKey = (Vec<usize>, Vec<usize>, Vec<(usize, u64)>, Vec<u64>);

struct Evaluator<'a> {
    g: &'a AttackGraph,
    active: Vec<bool>,
    memo: HashMap<MemoKey, Vec<f64>>,
    /// Scratch global-to-local map, reset after each use.
    slot: Vec<usize>,
    max_depth: usize,
}

impl Evaluator<'_> {
    /// Value contributed by the edge `e` into its head in the current state.
    fn contribution(&self, e: EdgeId, cut: &BTreeSet<usize>, vals: &[f64]) -> f64 {
        let tail = self.g.edge(e).tail.0;
        if self.active[e.0] && !cut.contains(&tail) {
            vals[tail]
        } else {
            0.0
        }
    }

    fn local(&self, v: usize, cut: &BTreeSet<usize>, vals: &[f64]) -> f64 {
        let inbound = self.g.in_edges(NodeId(v)).iter().map(|&e| self.contribution(e, cut, vals));
        match self.g.node(NodeId(v)) {
            Node::Source => 1.0,
            Node::Capability(_) | Node::Target => bayes_unchecked(inbound),
            Node::Exploit(ex) => match ex.logic {
                Logic::And => ex.probability * inbound.product::<f64>(),
                Logic::Or => ex.probability * bayes_unchecked(inbound),
            },
        }
    }

    /// Solves every node of `region`, assuming values of nodes feeding the
    /// region from outside are already in `vals`.
    fn region(&mut self, region: &[usize], cut: &BTreeSet<usize>, fixed: &BTreeMap<usize, f64>, vals: &mut [f64], depth: usize) {
        assert!(depth <= self.max_depth, "cycle resolution exceeded its depth bound");
        let comps = self.components(region, cut, fixed);
        for comp in comps {
            if comp.len() == 1 {
                let v = comp[0];
                vals[v] = match fixed.get(&v) {
                    Some(&p) => p,
                    None => self.local(v, cut, vals),
                };
                continue;
            }
            self.cycle(&comp, cut, fixed, vals, depth);
        }
    }

    fn components(&mut self, region: &[usize], cut: &BTreeSet<usize>, fixed: &BTreeMap<usize, f64>) -> Vec<Vec<usize>> {
        for (i, &v) in region.iter().enumerate() {
            self.slot[v] = i;
        }
        let adj: Vec<Vec<usize>> = region
            .iter()
            .map(|&u| {
                if cut.contains(&u) {
                    return Vec::new();
                }
                self.g
                    .out_edges(NodeId(u))
                    .iter()
                    .filter(|e| self.active[e.0])
                    .map(|&e| self.g.edge(e).head.0)
                    .filter(|h| self.slot[*h] != usize::MAX && !fixed.contains_key(h))
                    .map(|h| self.slot[h])
                    .collect()
            })
            .collect();
        let comps = tarjan(&adj);
        for &v in region {
            self.slot[v] = usize::MAX;
        }
        comps.into_iter().map(|c| c.into_iter().map(|i| region[i]).collect()).collect()
    }

    fn cycle(&mut self, comp: &[usize], cut: &BTreeSet<usize>, fixed: &BTreeMap<usize, f64>, vals: &mut [f64], depth: usize) {
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let mut entries = Vec::new();
        let mut inputs = Vec::new();
        for &v in comp {
            let mut is_entry = false;
            for &e in self.g.in_edges(NodeId(v)) {
                let tail = self.g.edge(e).tail.0;
                if members.contains(&tail) {
                    continue;
                }
                let live = self.active[e.0] && !cut.contains(&tail);
                is_entry |= live;
                inputs.push(if live { vals[tail].to_bits() } else { u64::MAX });
            }
            if is_entry {
                entries.push(v);
            }
        }
        if entries.is_empty() {
            for &v in comp {
                vals[v] = 0.0;
            }
            return;
        }
        let key: MemoKey = (
            comp.to_vec(),
            cut.iter().copied().filter(|c| members.contains(c)).collect(),
            fixed.iter().filter(|(k, _)| members.contains(k)).map(|(&k, v)| (k, v.to_bits())).collect(),
            inputs,
        );
        if let Some(hit) = self.memo.get(&key) {
            for (&v, &p) in comp.iter().zip(hit) {
                vals[v] = p;
            }
            return;
        }

        let mut pinned = fixed.clone();
        for &x in &entries {
            let mut cut_x = cut.clone();
            cut_x.insert(x);
            self.region(comp, &cut_x, fixed, vals, depth + 1);
            pinned.insert(x, vals[x]);
        }
        self.region(comp, cut, &pinned, vals, depth + 1);
        self.memo.insert(key, comp.iter().map(|&v| vals[v]).collect());
    }
}
