//! Slow reference implementations used to cross-check the fast paths.
//!
//! Nothing here is meant for production use: the functions are
//! exponential or sampling based and exist so tests (including downstream
//! ones) can compare against an independent computation.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attack_graph::{AttackGraph, Capability, EdgeId, Exploit, GraphBuilder, Logic, Node, NodeId};
use crate::milp::{solve_lp, ColumnKind, MilpProblem, Status};

/// Inclusion-exclusion over all non-empty subsets.
pub fn subset_sum_bayes(probs: &[f64]) -> f64 {
    let n = probs.len();
    assert!(n <= 20, "subset enumeration is exponential");
    let mut total = 0.0;
    for mask in 1u32..(1u32 << n) {
        let mut prod = 1.0;
        for (i, p) in probs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                prod *= p;
            }
        }
        total += if mask.count_ones() % 2 == 1 { prod } else { -prod };
    }
    total
}

/// Fraction of `samples` random worlds in which each node is reached. In
/// every world each exploit succeeds independently with its probability
/// and reachability is the least fixpoint of the AND/OR rules.
pub fn monte_carlo(g: &AttackGraph, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.node_count();
    let exploits: Vec<(usize, f64)> = g.exploits().map(|(id, e)| (id.0, e.probability)).collect();
    let mut counts = vec![0u64; n];
    let mut fired = vec![false; n];
    let mut reached = vec![false; n];
    for _ in 0..samples {
        for &(id, p) in &exploits {
            fired[id] = rng.random::<f64>() < p;
        }
        fixpoint(g, &fired, &BTreeSet::new(), &mut reached);
        for (c, &r) in counts.iter_mut().zip(&reached) {
            *c += r as u64;
        }
    }
    counts.into_iter().map(|c| c as f64 / samples as f64).collect()
}

/// Reachability fixpoint where an exploit can only be used if `enabled`.
fn fixpoint(g: &AttackGraph, enabled: &[bool], severed: &BTreeSet<EdgeId>, reached: &mut [bool]) {
    reached.iter_mut().for_each(|r| *r = false);
    reached[AttackGraph::SIGMA.0] = true;
    for s in g.start() {
        reached[s.0] = true;
    }
    loop {
        let mut changed = false;
        for (id, node) in g.nodes() {
            if reached[id.0] {
                continue;
            }
            let mut live = g.in_edges(id).iter().map(|e| !severed.contains(e) && reached[g.edge(*e).tail.0]);
            let now = match node {
                Node::Source => true,
                Node::Capability(_) | Node::Target => live.any(|x| x),
                Node::Exploit(ex) => {
                    enabled[id.0]
                        && match ex.logic {
                            Logic::And => !g.in_edges(id).is_empty() && live.all(|x| x),
                            Logic::Or => live.any(|x| x),
                        }
                }
            };
            if now {
                reached[id.0] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Reachable set computed by naive fixpoint iteration (every exploit usable).
pub fn naive_reach(g: &AttackGraph, severed: &BTreeSet<EdgeId>) -> BTreeSet<NodeId> {
    let mut reached = vec![false; g.node_count()];
    fixpoint(g, &vec![true; g.node_count()], severed, &mut reached);
    reached.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| NodeId(i)).collect()
}

/// Best product of head weights over every simple path from `sigma` to
/// `mu`, by exhaustive depth-first enumeration. 0 when no path exists.
pub fn enumerate_paths(g: &AttackGraph, severed: &BTreeSet<EdgeId>, epsilon: f64) -> f64 {
    fn dfs(g: &AttackGraph, v: NodeId, prod: f64, on_path: &mut Vec<bool>, sev: &BTreeSet<EdgeId>, eps: f64, best: &mut f64) {
        if v == AttackGraph::MU {
            *best = best.max(prod);
            return;
        }
        for &e in g.out_edges(v) {
            let head = g.edge(e).head;
            if on_path[head.0] {
                continue;
            }
            let w = if sev.contains(&e) { eps } else { g.head_weight(head) };
            on_path[head.0] = true;
            dfs(g, head, prod * w, on_path, sev, eps, best);
            on_path[head.0] = false;
        }
    }
    let mut on_path = vec![false; g.node_count()];
    on_path[AttackGraph::SIGMA.0] = true;
    let mut best = 0.0;
    dfs(g, AttackGraph::SIGMA, 1.0, &mut on_path, severed, epsilon, &mut best);
    best
}

/// Optimum over every assignment of the binary columns, each completed by
/// an LP solve over the continuous ones. `None` when all are infeasible.
pub fn enumerate_milp(p: &MilpProblem) -> Option<f64> {
    let bins: Vec<usize> = p.columns.iter().enumerate().filter(|(_, c)| c.kind == ColumnKind::Binary).map(|(i, _)| i).collect();
    assert!(bins.len() <= 20, "binary enumeration is exponential");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << bins.len()) {
        let mut q = p.clone();
        let mut skip = false;
        for (k, &c) in bins.iter().enumerate() {
            let v = f64::from(mask >> k & 1);
            let col = &mut q.columns[c];
            if v < col.lower || v > col.upper {
                skip = true;
                break;
            }
            col.kind = ColumnKind::Continuous;
            col.lower = v;
            col.upper = v;
        }
        if skip {
            continue;
        }
        let s = solve_lp(&q).expect("enumeration subproblems are bounded");
        if s.status == Status::Optimal && best.is_none_or(|b| s.objective < b) {
            best = Some(s.objective);
        }
    }
    best
}

/// Random attack graph whose underlying undirected graph is a tree, so
/// predecessor scores are independent. At most `max_nodes` nodes besides
/// `sigma` and `mu`.
pub fn random_polytree<R: Rng>(rng: &mut R, max_nodes: usize) -> AttackGraph {
    let mut b = GraphBuilder::new();
    let mut caps = Vec::new();
    let mut device = 0u32;
    let mut new_cap = |b: &mut GraphBuilder, rng: &mut R| {
        device += 1;
        b.capability(Capability::new(device, 1, rng.random_range(0..=10) as f64))
    };
    let root = new_cap(&mut b, rng);
    b.start(root);
    caps.push(root);
    let mut total = 1;
    while total + 2 <= max_nodes.max(3) {
        let logic = if rng.random_bool(0.5) { Logic::And } else { Logic::Or };
        let ex = b.exploit(Exploit::vulnerability(logic, rng.random_range(0.05..=1.0)));
        let anchor = caps[rng.random_range(0..caps.len())];
        let fresh = new_cap(&mut b, rng);
        if rng.random_bool(0.6) {
            b.edge(anchor, ex).edge(ex, fresh);
        } else {
            b.edge(fresh, ex).edge(ex, anchor);
            if rng.random_bool(0.5) {
                b.start(fresh);
            }
        }
        caps.push(fresh);
        total += 2;
        if total < max_nodes && rng.random_bool(0.3) {
            let extra = new_cap(&mut b, rng);
            b.edge(extra, ex);
            if rng.random_bool(0.5) {
                b.start(extra);
            }
            caps.push(extra);
            total += 1;
        }
    }
    b.build().expect("generated polytrees are well formed")
}

/// Random acyclic graph of at most `max_nodes` nodes. Exploits take
/// preconditions from lower-numbered capabilities and grant higher-numbered
/// ones, so paths may reconverge but never loop.
pub fn random_dag<R: Rng>(rng: &mut R, max_nodes: usize) -> AttackGraph {
    loop {
        let n_caps = rng.random_range(2..=max_nodes.saturating_sub(1).max(2));
        let n_ex = rng.random_range(1..=(max_nodes - n_caps).max(1));
        let mut b = GraphBuilder::new();
        let caps: Vec<NodeId> = (0..n_caps).map(|i| b.capability(Capability::new(i as u32, 1, rng.random_range(0..=10) as f64))).collect();
        b.start(caps[0]);
        for _ in 0..n_ex {
            let logic = if rng.random_bool(0.5) { Logic::And } else { Logic::Or };
            let ex = b.exploit(Exploit::vulnerability(logic, rng.random_range(0.05..=1.0)));
            let cut = rng.random_range(1..n_caps);
            let mut pres: Vec<usize> = (0..rng.random_range(1..=cut.min(3))).map(|_| rng.random_range(0..cut)).collect();
            pres.sort_unstable();
            pres.dedup();
            for p in pres {
                b.edge(caps[p], ex);
            }
            for _ in 0..rng.random_range(1..=2) {
                b.edge(ex, caps[rng.random_range(cut..n_caps)]);
            }
        }
        if let Ok(g) = b.build() {
            return g;
        }
    }
}

/// Random graph of at most `max_nodes` nodes with arbitrary edges (cycles
/// and reconvergence allowed).
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> AttackGraph {
    loop {
        let n_caps = rng.random_range(2..=max_nodes.saturating_sub(1).max(2));
        let n_ex = rng.random_range(1..=(max_nodes - n_caps).max(1));
        let mut b = GraphBuilder::new();
        let caps: Vec<NodeId> = (0..n_caps).map(|i| b.capability(Capability::new(i as u32, 1, rng.random_range(0..=10) as f64))).collect();
        b.start(caps[0]);
        if rng.random_bool(0.3) {
            b.start(caps[1]);
        }
        for _ in 0..n_ex {
            let logic = if rng.random_bool(0.5) { Logic::And } else { Logic::Or };
            let ex = b.exploit(Exploit::vulnerability(logic, rng.random_range(0.05..=1.0)));
            let pre = rng.random_range(1..=n_caps.min(3));
            let mut pres: Vec<NodeId> = (0..pre).map(|_| caps[rng.random_range(0..n_caps)]).collect();
            pres.sort();
            pres.dedup();
            for p in pres {
                b.edge(p, ex);
            }
            let grants = rng.random_range(1..=2);
            for _ in 0..grants {
                b.edge(ex, caps[rng.random_range(0..n_caps)]);
            }
        }
        if let Ok(g) = b.build() {
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_sum_small_cases() {
        assert_eq!(subset_sum_bayes(&[]), 0.0);
        assert!((subset_sum_bayes(&[0.5, 0.5]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn polytree_size_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let g = random_polytree(&mut rng, 12);
            assert!(g.node_count() - 2 <= 12);
            // Tree: edges between real nodes = nodes - 1.
            let real_edges = g.edges().filter(|(_, e)| e.tail != AttackGraph::SIGMA).count();
            assert_eq!(real_edges, g.node_count() - 3);
        }
    }
}
