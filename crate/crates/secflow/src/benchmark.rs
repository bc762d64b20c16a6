//! Seeded fat-tree instances with synthetic traffic and vulnerabilities.
//!
//! All sampling uses `ChaCha8Rng` seeded from `GenSpec::seed`, in the order
//! documented on each function, so instances are reproducible bit for bit.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::{Capability, DeviceId, Exploit, ExploitRecord, GraphFile, Logic};
use crate::instance::Instance;
use crate::network::{Flow, Link, NetworkInstance};

pub const LINK_CAPACITY: f64 = 1000.0;
pub const SWITCH_CAPACITY: f64 = 1000.0;
pub const INTERNAL_SHARE: f64 = 0.7;
pub const SMALL_SHARE: f64 = 0.9;
pub const FLOW_VALUES: [f64; 5] = [1.0, 2.0, 3.0, 5.0, 25.0];
/// Lower end of sampled exploit probabilities.
pub const MIN_PROBABILITY: f64 = 1e-3;
pub const PRIVILEGE_SCALE: [f64; 3] = [0.2, 0.4, 1.0];
const TYPE_NAMES: [&str; 3] = ["A", "B", "C"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub pods: u32,
    pub flows_per_host: u32,
    pub traffic_types: u32,
    pub exploitable_host_pct: u32,
    pub vulns_per_host: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec { pods: 4, flows_per_host: 1, traffic_types: 1, exploitable_host_pct: 20, vulns_per_host: 2.0, seed: 0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("pod count {0} must be even and at least 4")]
    BadPodCount(u32),
    #[error("{what} = {value} is not one of the allowed values")]
    BadSpec { what: &'static str, value: String },
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.pods < 4 || !self.pods.is_multiple_of(2) {
            return Err(GenError::BadPodCount(self.pods));
        }
        let bad = |what, value: String| Err(GenError::BadSpec { what, value });
        if ![1, 3, 5, 10].contains(&self.flows_per_host) {
            return bad("flows_per_host", self.flows_per_host.to_string());
        }
        if !(1..=3).contains(&self.traffic_types) {
            return bad("traffic_types", self.traffic_types.to_string());
        }
        if ![10, 20, 30, 40, 50].contains(&self.exploitable_host_pct) {
            return bad("exploitable_host_pct", self.exploitable_host_pct.to_string());
        }
        if !(1.0..=5.0).contains(&self.vulns_per_host) {
            return bad("vulns_per_host", self.vulns_per_host.to_string());
        }
        Ok(())
    }
}

/// Fat tree with `k` pods plus a gateway above the core.
///
/// Device ids: gateway 0, then the `(k/2)^2` core switches, then the
/// aggregation switches pod by pod, then the edge switches pod by pod,
/// then the hosts edge switch by edge switch.
pub fn fat_tree(k: u32) -> Result<NetworkInstance, GenError> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(GenError::BadPodCount(k));
    }
    let half = k / 2;
    let core0 = 1;
    let agg0 = core0 + half * half;
    let edge0 = agg0 + k * half;
    let host0 = edge0 + k * half;
    let hosts_n = k * k * k / 4;
    let link = |a: DeviceId, b: DeviceId| Link { a, b, capacity: LINK_CAPACITY, cost: None };

    let mut links = Vec::new();
    for c in 0..half * half {
        links.push(link(0, core0 + c));
    }
    for pod in 0..k {
        for j in 0..half {
            let agg = agg0 + pod * half + j;
            for c in 0..half {
                links.push(link(core0 + j * half + c, agg));
            }
            for e in 0..half {
                links.push(link(agg, edge0 + pod * half + e));
            }
        }
        for e in 0..half {
            let edge = edge0 + pod * half + e;
            for h in 0..half {
                links.push(link(edge, host0 + (pod * half + e) * half + h));
            }
        }
    }
    let routers: Vec<DeviceId> = (0..host0).collect();
    let device_capacity = routers.iter().map(|&r| (r, SWITCH_CAPACITY)).collect();
    Ok(NetworkInstance {
        routers,
        hosts: (host0..host0 + hosts_n).collect(),
        gateways: vec![0],
        links,
        traffic_types: Vec::new(),
        flows: Vec::new(),
        device_capacity,
    })
}

/// `hosts * flows_per_host` demands, each emitted as a flow and its
/// reverse (flows `2i` and `2i + 1`). Per demand the draws are: internal
/// or external, endpoints, small or large, size, type, value.
///
/// Hosts cannot block their own traffic, so a demand that would push a
/// sending host's uplink or its switch's inbound load past capacity gets its
/// size redrawn from the small range (up to `REDRAWS` times), then clamped
/// to what is left. Instances then stay feasible by blocking at the first
/// switch, unless a switch is already saturated.
pub fn gen_traffic<R: Rng>(net: &NetworkInstance, spec: &GenSpec, rng: &mut R) -> Vec<Flow> {
    const REDRAWS: usize = 16;
    let hosts = &net.hosts;
    let gateway = net.gateways[0];
    let uplink: BTreeMap<DeviceId, (DeviceId, f64)> = net
        .links
        .iter()
        .filter_map(|l| match (net.is_host(l.a), net.is_host(l.b)) {
            (true, false) => Some((l.a, (l.b, l.capacity))),
            (false, true) => Some((l.b, (l.a, l.capacity))),
            _ => None,
        })
        .collect();
    let mut load: BTreeMap<DeviceId, f64> = BTreeMap::new();
    // Host uplinks and switch inbound loads a demand of size `q` adds.
    let added = |senders: &[DeviceId], q: f64| {
        let mut add: BTreeMap<DeviceId, (f64, f64)> = BTreeMap::new();
        for h in senders {
            if let Some(&(sw, cap)) = uplink.get(h) {
                add.entry(*h).or_insert((0.0, cap)).0 += q;
                let sw_cap = net.device_capacity.get(&sw).copied().unwrap_or(f64::INFINITY);
                add.entry(sw).or_insert((0.0, sw_cap)).0 += q;
            }
        }
        add
    };
    let fits = |load: &BTreeMap<DeviceId, f64>, senders: &[DeviceId], q: f64| {
        added(senders, q).iter().all(|(d, &(extra, cap))| load.get(d).copied().unwrap_or(0.0) + extra <= cap)
    };

    let demands = hosts.len() * spec.flows_per_host as usize;
    let mut flows = Vec::with_capacity(2 * demands);
    for _ in 0..demands {
        let (src, dst) = if rng.random_bool(INTERNAL_SHARE) {
            let pair = index::sample(rng, hosts.len(), 2);
            (hosts[pair.index(0)], hosts[pair.index(1)])
        } else {
            (hosts[rng.random_range(0..hosts.len())], gateway)
        };
        let senders: Vec<DeviceId> = [src, dst].into_iter().filter(|&d| net.is_host(d)).collect();
        let mut quantity = if rng.random_bool(SMALL_SHARE) { rng.random_range(1.0..=10.0) } else { rng.random_range(100.0..=1000.0) };
        for _ in 0..REDRAWS {
            if fits(&load, &senders, quantity) {
                break;
            }
            quantity = rng.random_range(1.0..=10.0);
        }
        if !fits(&load, &senders, quantity) {
            let headroom = added(&senders, 1.0)
                .iter()
                .map(|(d, &(mult, cap))| (cap - load.get(d).copied().unwrap_or(0.0)) / mult)
                .fold(f64::INFINITY, f64::min);
            if headroom > 0.0 {
                quantity = headroom;
            }
        }
        for (d, (extra, _)) in added(&senders, quantity) {
            *load.entry(d).or_default() += extra;
        }
        let traffic_type = net.traffic_types[rng.random_range(0..net.traffic_types.len())].clone();
        let value = FLOW_VALUES[rng.random_range(0..FLOW_VALUES.len())];
        flows.push(Flow { src, dst, traffic_type: traffic_type.clone(), quantity, value });
        flows.push(Flow { src: dst, dst: src, traffic_type, quantity, value });
    }
    flows
}

/// Capabilities, vulnerability exploits and the start set.
///
/// Draws, in order: one value per host (hosts in id order); the
/// exploitable hosts; then per exploit its precondition count, its host or
/// chained parent, extra preconditions, traffic type, and probability.
///
/// A single-precondition exploit on host `h` turns `(h, 0:t)` into
/// `(h, 1)`. A multi-precondition exploit picks a random earlier
/// single-precondition exploit, requires its granted `(h, 1)` plus further
/// capabilities drawn from those granted by earlier exploits, and grants
/// `(h, 2)`. Until a single-precondition exploit exists every exploit is a
/// single-precondition one.
pub fn gen_vulnerabilities<R: Rng>(net: &NetworkInstance, spec: &GenSpec, rng: &mut R) -> GraphFile {
    let types = &net.traffic_types;
    let mut capabilities = Vec::new();
    let gateway = net.gateways[0];
    capabilities.push(Capability::new(gateway, 2, 0.0));
    // Per host: reach capability per type, then privilege 1 and 2.
    let stride = types.len() + 2;
    let first = capabilities.len();
    for &h in &net.hosts {
        let value = f64::from(rng.random_range(1u32..=100));
        for t in types {
            capabilities.push(Capability::reach(h, t.clone(), value * PRIVILEGE_SCALE[0]));
        }
        capabilities.push(Capability::new(h, 1, value * PRIVILEGE_SCALE[1]));
        capabilities.push(Capability::new(h, 2, value * PRIVILEGE_SCALE[2]));
    }
    let cap_index = |host_pos: usize, slot: usize| first + host_pos * stride + slot;

    let count = exploitable_count(net.hosts.len(), spec.exploitable_host_pct);
    let mut exploitable: Vec<usize> = index::sample(rng, net.hosts.len(), count).into_vec();
    exploitable.sort_unstable();
    let total = if count == 0 { 0 } else { (count as f64 * spec.vulns_per_host).round() as usize };

    let mut exploits: Vec<ExploitRecord> = Vec::with_capacity(total);
    let mut singles: Vec<usize> = Vec::new();
    let mut achievable: Vec<usize> = Vec::new();
    for _ in 0..total {
        let n = match rng.random_range(0..4) {
            0 | 1 => 1,
            2 => 2,
            _ => 3,
        };
        let record = if n == 1 || singles.is_empty() {
            let pos = exploitable[rng.random_range(0..exploitable.len())];
            let t = rng.random_range(0..types.len());
            singles.push(exploits.len());
            ExploitRecord {
                exploit: Exploit::vulnerability(Logic::Or, rng.random_range(MIN_PROBABILITY..=1.0)),
                preconditions: vec![cap_index(pos, t)],
                grants: vec![cap_index(pos, types.len())],
            }
        } else {
            let parent = &exploits[singles[rng.random_range(0..singles.len())]];
            let post = parent.grants[0];
            let host_pos = (post - first) / stride;
            let mut pre = vec![post];
            for _ in 1..n {
                let c = achievable[rng.random_range(0..achievable.len())];
                if !pre.contains(&c) {
                    pre.push(c);
                }
            }
            pre.sort_unstable();
            ExploitRecord {
                exploit: Exploit::vulnerability(Logic::And, rng.random_range(MIN_PROBABILITY..=1.0)),
                preconditions: pre,
                grants: vec![cap_index(host_pos, types.len() + 1)],
            }
        };
        for &g in &record.grants {
            if !achievable.contains(&g) {
                achievable.push(g);
            }
        }
        exploits.push(record);
    }
    GraphFile { capabilities, exploits, start: vec![0] }
}

/// Hosts with at least one vulnerability for a percentage.
pub fn exploitable_count(hosts: usize, pct: u32) -> usize {
    (hosts as f64 * f64::from(pct) / 100.0).round() as usize
}

/// Complete instance for `spec`.
pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    spec.validate()?;
    let mut net = fat_tree(spec.pods)?;
    net.traffic_types = TYPE_NAMES[..spec.traffic_types as usize].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    net.flows = gen_traffic(&net, spec, &mut rng);
    let vulnerabilities = gen_vulnerabilities(&net, spec, &mut rng);
    Ok(Instance { network: net, vulnerabilities })
}
