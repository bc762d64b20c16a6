//! Reach and Path, the two linear-friendly risk approximations, evaluated
//! directly on a graph and a set of severed edges.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::attack_graph::{AttackGraph, EdgeId, Logic, Node, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("epsilon {epsilon} must be in (0, {limit})")]
    BadEpsilon { epsilon: f64, limit: f64 },
    #[error("beta {0} must be in [0, 1]")]
    BadBeta(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reach {
    pub reachable: BTreeSet<NodeId>,
    /// Sum of impacts over reachable capabilities.
    pub value: f64,
}

/// Least fixpoint of attacker reachability. Start capabilities are always
/// held; an edge is traversable when its tail is reached and it is not
/// severed; OR nodes need one traversable inbound edge, AND nodes all.
pub fn reach(g: &AttackGraph, severed: &BTreeSet<EdgeId>) -> Reach {
    let n = g.node_count();
    let mut reached = vec![false; n];
    let mut live_in = vec![0usize; n];
    let mut queue = Vec::new();
    let mark = |v: NodeId, reached: &mut Vec<bool>, queue: &mut Vec<NodeId>| {
        if !reached[v.0] {
            reached[v.0] = true;
            queue.push(v);
        }
    };
    mark(AttackGraph::SIGMA, &mut reached, &mut queue);
    for &s in g.start() {
        mark(s, &mut reached, &mut queue);
    }
    while let Some(u) = queue.pop() {
        for &e in g.out_edges(u) {
            if severed.contains(&e) {
                continue;
            }
            let v = g.edge(e).head;
            live_in[v.0] += 1;
            let ready = match g.node(v) {
                Node::Exploit(ex) if ex.logic == Logic::And => live_in[v.0] == g.in_edges(v).len(),
                _ => true,
            };
            if ready {
                mark(v, &mut reached, &mut queue);
            }
        }
    }
    let reachable: BTreeSet<NodeId> = reached.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| NodeId(i)).collect();
    let value = g.capabilities().filter(|(id, _)| reached[id.0]).map(|(_, c)| c.impact).sum();
    Reach { reachable, value }
}

/// Smallest exploit probability in the graph, target exploits included.
pub fn min_probability(g: &AttackGraph) -> f64 {
    g.exploits().map(|(_, e)| e.probability).fold(1.0, f64::min)
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Probability of the most effective attack path from `sigma` to `mu`. An
/// edge into node `n` carries `p(n)` for exploits and 1 otherwise, or
/// `epsilon` when severed. Returns 0 when `mu` is unreachable.
pub fn path(g: &AttackGraph, severed: &BTreeSet<EdgeId>, epsilon: f64) -> Result<f64, MeasureError> {
    let limit = min_probability(g);
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(MeasureError::BadEpsilon { epsilon, limit });
    }
    Ok(log_path(g, severed, epsilon).map_or(0.0, f64::exp))
}

/// Natural log of [`path`]; `None` when no path exists.
pub fn log_path(g: &AttackGraph, severed: &BTreeSet<EdgeId>, epsilon: f64) -> Option<f64> {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[AttackGraph::SIGMA.0] = 0.0;
    heap.push(Reverse((Dist(0.0), AttackGraph::SIGMA)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if done[u.0] {
            continue;
        }
        done[u.0] = true;
        if u == AttackGraph::MU {
            break;
        }
        for &e in g.out_edges(u) {
            let v = g.edge(e).head;
            let w = if severed.contains(&e) { epsilon } else { g.head_weight(v) };
            let nd = d - w.ln();
            if nd < dist[v.0] {
                dist[v.0] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    let d = dist[AttackGraph::MU.0];
    d.is_finite().then_some(-d)
}

/// `beta * reach_value / total_impact + (1 - beta) * path`, in [0, 1].
pub fn hybrid(reach_value: f64, total_impact: f64, path: f64, beta: f64) -> Result<f64, MeasureError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(MeasureError::BadBeta(beta));
    }
    let norm = if total_impact > 0.0 { reach_value / total_impact } else { 0.0 };
    Ok(beta * norm + (1.0 - beta) * path)
}

/// Sum of all capability impacts, the largest possible Reach value.
pub fn total_impact(g: &AttackGraph) -> f64 {
    g.capabilities().map(|(_, c)| c.impact).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack_graph::{Capability, Exploit, GraphBuilder};
    use crate::oracle::{enumerate_paths, naive_reach, random_graph};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-6;

    fn toy() -> (AttackGraph, crate::instance::AssembledGraph) {
        let asm = crate::toy::toy_instance().assemble().unwrap();
        (asm.graph.clone(), asm)
    }

    #[test]
    fn toy_open_reaches_targets() {
        let (g, _) = toy();
        let r = reach(&g, &BTreeSet::new());
        for dev in [4, 6] {
            assert!(r.reachable.contains(&g.find_capability(dev, 1, None).unwrap()));
        }
        assert_eq!(r.value, 22.0);
    }

    #[test]
    fn toy_cut_gateway_connection() {
        let (g, asm) = toy();
        let ex = asm.connections.iter().find(|(c, _)| c.source == 0).unwrap().1;
        let sev: BTreeSet<EdgeId> = g.in_edges(*ex).iter().copied().collect();
        let r = reach(&g, &sev);
        for dev in [3, 4, 6] {
            assert!(!r.reachable.contains(&g.find_capability(dev, 1, None).unwrap()));
        }
        assert!(!r.reachable.contains(ex));
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn everything_severed_leaves_start() {
        let (g, _) = toy();
        let all: BTreeSet<EdgeId> = g.edges().map(|(id, _)| id).collect();
        let r = reach(&g, &all);
        let mut want: BTreeSet<NodeId> = g.start().iter().copied().collect();
        want.insert(AttackGraph::SIGMA);
        assert_eq!(r.reachable, want);
        let start_impact: f64 = g.start().iter().map(|s| g.node(*s).as_capability().unwrap().impact).sum();
        assert_eq!(r.value, start_impact);
        assert!(path(&g, &all, EPS).unwrap() < 1e-6);
    }

    fn single_chain(p: f64) -> AttackGraph {
        let mut b = GraphBuilder::new();
        let s = b.capability(Capability::new(0, 2, 0.0));
        let c = b.capability(Capability::new(1, 1, 1.0));
        let e = b.exploit(Exploit::vulnerability(Logic::Or, p));
        b.edge(s, e).edge(e, c).start(s);
        b.build().unwrap().with_targets()
    }

    #[test]
    fn single_chain_path() {
        assert!((path(&single_chain(0.5), &BTreeSet::new(), EPS).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parallel_chains_take_max() {
        let mut b = GraphBuilder::new();
        let s = b.capability(Capability::new(0, 2, 0.0));
        let c = b.capability(Capability::new(1, 1, 1.0));
        for (p1, p2) in [(0.6, 0.5), (0.8, 0.5)] {
            let mid = b.capability(Capability::new(2, 1, 0.0));
            let e1 = b.exploit(Exploit::vulnerability(Logic::Or, p1));
            let e2 = b.exploit(Exploit::vulnerability(Logic::Or, p2));
            b.edge(s, e1).edge(e1, mid).edge(mid, e2).edge(e2, c);
        }
        b.start(s);
        let g = b.build().unwrap().with_targets();
        assert!((path(&g, &BTreeSet::new(), EPS).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn no_target_means_zero() {
        let mut b = GraphBuilder::new();
        let s = b.capability(Capability::new(0, 2, 0.0));
        b.start(s);
        let g = b.build().unwrap().with_targets();
        assert_eq!(path(&g, &BTreeSet::new(), EPS).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_must_be_below_every_probability() {
        let g = single_chain(0.5);
        assert!(matches!(path(&g, &BTreeSet::new(), 0.7), Err(MeasureError::BadEpsilon { .. })));
        assert!(matches!(path(&g, &BTreeSet::new(), 0.0), Err(MeasureError::BadEpsilon { .. })));
    }

    /// The only route to the target runs through an AND exploit whose second
    /// prerequisite is unreachable. Path still counts it; Reach does not.
    #[test]
    fn path_ignores_and_semantics() {
        let mut b = GraphBuilder::new();
        let s = b.capability(Capability::new(0, 2, 0.0));
        let locked = b.capability(Capability::new(1, 1, 0.0));
        let goal = b.capability(Capability::new(2, 1, 5.0));
        let and = b.exploit(Exploit::vulnerability(Logic::And, 0.9));
        let opener = b.exploit(Exploit::vulnerability(Logic::Or, 0.9));
        b.edge(s, and).edge(locked, and).edge(and, goal);
        b.edge(goal, opener).edge(opener, locked);
        b.start(s);
        let g = b.build().unwrap().with_targets();
        let r = reach(&g, &BTreeSet::new());
        assert!(!r.reachable.contains(&and));
        assert!(!r.reachable.contains(&goal));
        assert!(path(&g, &BTreeSet::new(), EPS).unwrap() > 0.5);
    }

    #[test]
    fn hybrid_range() {
        assert!(hybrid(1.0, 2.0, 0.4, 1.5).is_err());
        for b in 0..=10 {
            let beta = b as f64 / 10.0;
            let h = hybrid(3.0, 4.0, 0.25, beta).unwrap();
            assert!((0.0..=1.0).contains(&h));
        }
        assert_eq!(hybrid(3.0, 0.0, 0.5, 1.0).unwrap(), 0.0);
    }

    fn random_severed<R: Rng>(rng: &mut R, g: &AttackGraph, p: f64) -> BTreeSet<EdgeId> {
        g.edges().filter(|_| rng.random_bool(p)).map(|(id, _)| id).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn reach_matches_naive_fixpoint(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, 10).with_targets();
            let sev = random_severed(&mut rng, &g, 0.2);
            prop_assert_eq!(reach(&g, &sev).reachable, naive_reach(&g, &sev));
        }

        #[test]
        fn path_matches_enumeration(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, 10).with_targets();
            let sev = random_severed(&mut rng, &g, 0.2);
            let fast = path(&g, &sev, EPS).unwrap();
            let slow = enumerate_paths(&g, &sev, EPS);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1e-300) + 1e-300, "{} vs {}", fast, slow);
        }

        #[test]
        fn severing_is_monotone(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, 10).with_targets();
            let small = random_severed(&mut rng, &g, 0.1);
            let mut big = small.clone();
            big.extend(random_severed(&mut rng, &g, 0.2));
            let r_small = reach(&g, &small);
            let r_big = reach(&g, &big);
            prop_assert!(r_big.reachable.is_subset(&r_small.reachable));
            let p_none = path(&g, &BTreeSet::new(), EPS).unwrap();
            let p_small = path(&g, &small, EPS).unwrap();
            let p_big = path(&g, &big, EPS).unwrap();
            prop_assert!(p_none <= 1.0);
            prop_assert!(p_big <= p_small * (1.0 + 1e-12));
            prop_assert!(p_small <= p_none * (1.0 + 1e-12));
        }
    }
}
