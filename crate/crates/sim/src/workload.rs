//! Per-service operation plans: the sequence of server visits one metadata
//! operation makes, with the CPU and latency each visit costs.
//!
//! Every operation targets an owner drawn uniformly from the servers holding
//! data, with the identifier drawn uniformly from that owner's range. Each
//! server therefore sees the same storage load whatever its share of the
//! identifier space.

use metaflow_core::baselines::{ring_position, ChordRing, OneHopDirectory};
use metaflow_core::overlay::{map_topology, OverlayError, OverlayTree};
use metaflow_core::MetaDataId;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ScenarioConfig, Service};
use crate::cost::{secs_to_ns, CostModel};
use crate::{stream_rng, SimError, STREAM_ORACLE, STREAM_PRELOAD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Lookup,
    Io,
    Nat,
}

impl Component {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// One CPU step at a server. The server's CPU is held for `cpu_ns`; the
/// step completes after `max(cpu_ns, floor_ns)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stage {
    pub component: Component,
    pub cpu_ns: u64,
    pub floor_ns: u64,
}

impl Stage {
    pub fn service_ns(&self) -> u64 {
        self.cpu_ns.max(self.floor_ns)
    }
}

/// Which CPU steps a visit runs; see [`Workload::stages`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum VisitKind {
    Io,
    /// Storage, then the NAT agent on the same server.
    IoNat,
    Lookup,
    ChordHop,
}

/// Kept small: every in-flight operation holds its whole plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Visit {
    pub resource: u32,
    /// Network time spent on the exchanges with this server.
    pub net_ns: u32,
    pub kind: VisitKind,
}

enum Placement {
    /// Owner picked directly, no lookup.
    Direct,
    HashMod,
    Chord { ring: ChordRing, server: Vec<u32> },
    OneHop { dir: OneHopDirectory, ring: ChordRing, server: Vec<u32> },
    Central,
    MetaFlow { leaves: Vec<u32> },
}

pub struct Workload {
    pub service: Service,
    pub model: CostModel,
    names: Vec<String>,
    servers: usize,
    placement: Placement,
    tree: Option<OverlayTree>,
    get_fraction: f64,
    get_size: u32,
    put_size: u32,
    rtt_ns: u64,
    ns_per_byte: f64,
    /// Indexed by [`VisitKind`].
    stages: [(Stage, Option<Stage>); 4],
}

impl Workload {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let model = cfg.cost_model()?;
        let topo = cfg.build_topology()?;
        let names: Vec<String> = topo.active_servers().map(|n| n.name.clone()).collect();
        let servers = names.len();
        if servers == 0 {
            return Err(SimError::Config("topology has no active servers".into()));
        }
        let mut tree = None;
        let placement = match cfg.service {
            Service::Ideal => Placement::Direct,
            Service::Hashmod => Placement::HashMod,
            Service::Central => Placement::Central,
            Service::Chord | Service::Onehop => {
                let ring = ChordRing::from_names(&names)?;
                let server = ring_servers(&ring, &names);
                if cfg.service == Service::Chord {
                    Placement::Chord { ring, server }
                } else {
                    Placement::OneHop { dir: OneHopDirectory::from_ring(&ring), ring, server }
                }
            }
            Service::Metaflow => {
                let t = preload(cfg, &topo)?;
                let index: std::collections::HashMap<&str, u32> =
                    names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();
                let leaves = t
                    .busy_leaves()
                    .map(|l| index[t.topology().node(l.physical[0]).name.as_str()])
                    .collect();
                tree = Some(t);
                Placement::MetaFlow { leaves }
            }
        };
        let mut names = names;
        if cfg.service == Service::Central {
            names.push("coordinator".into());
        }
        let link = model.link_latency;
        let rtt_ns = secs_to_ns(2.0 * f64::from(topo.client_path_links()) * link);
        let stage = |component, units: f64, floor: f64| Stage {
            component,
            cpu_ns: model.cpu_ns(units),
            floor_ns: secs_to_ns(floor),
        };
        let io = stage(Component::Io, model.io_cost, model.io_latency);
        let nat = stage(Component::Nat, model.nat_cost, model.nat_latency);
        let lookup = stage(Component::Lookup, model.lookup_hop_cost, model.lookup_latency);
        // A Chord hop asks the node for its successor and then for its
        // closest preceding finger: one RPC of CPU, two exchanges of latency.
        let chord_hop = stage(Component::Lookup, model.lookup_hop_cost, 2.0 * model.lookup_latency);
        Ok(Workload {
            service: cfg.service,
            names,
            servers,
            placement,
            tree,
            get_fraction: cfg.workload.get_fraction,
            get_size: cfg.workload.get_size,
            put_size: cfg.workload.put_size,
            rtt_ns,
            ns_per_byte: 1e9 / model.link_bandwidth,
            stages: [(io, None), (io, Some(nat)), (lookup, None), (chord_hop, None)],
            model,
        })
    }

    /// Names of the CPU resources, indexed like [`Visit::resource`]: the active
    /// servers, then the coordinator for the central service.
    pub fn resources(&self) -> &[String] {
        &self.names
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn tree(&self) -> Option<&OverlayTree> {
        self.tree.as_ref()
    }

    pub fn rtt_ns(&self) -> u64 {
        self.rtt_ns
    }

    pub fn stages(&self, kind: VisitKind) -> (Stage, Option<Stage>) {
        self.stages[kind as usize]
    }

    pub fn visit_cpu_ns(&self, v: &Visit) -> u64 {
        let (a, b) = self.stages(v.kind);
        a.cpu_ns + b.map_or(0, |s| s.cpu_ns)
    }

    /// Fills `out` with the visits of one fresh operation and returns its
    /// lookup RPC count.
    pub fn plan(&self, rng: &mut ChaCha8Rng, out: &mut Vec<Visit>) -> u32 {
        out.clear();
        let bytes = if rng.gen_bool(self.get_fraction) { self.get_size } else { self.put_size };
        let owner_net = self.rtt_ns + (f64::from(bytes) * self.ns_per_byte).round() as u64;
        let owner_net = u32::try_from(owner_net).expect("owner exchange under 4 s");
        let rtt = self.rtt_ns as u32;
        let io_visit = |resource: u32| Visit { resource, net_ns: owner_net, kind: VisitKind::Io };
        let lookup_visit = |resource: u32| Visit { resource, net_ns: rtt, kind: VisitKind::Lookup };
        match &self.placement {
            Placement::Direct => {
                out.push(io_visit(rng.gen_range(0..self.servers) as u32));
                0
            }
            Placement::HashMod => {
                let id = MetaDataId(rng.gen());
                let owner = metaflow_core::baselines::hash_mod_lookup(id, self.servers).expect("servers >= 1");
                out.push(io_visit(owner as u32));
                0
            }
            Placement::Central => {
                out.push(lookup_visit(self.servers as u32));
                out.push(io_visit(rng.gen_range(0..self.servers) as u32));
                1
            }
            Placement::Chord { ring, server } => {
                let (owner, id) = ring_draw(ring, rng);
                let start = rng.gen_range(0..ring.len());
                let mut hops = 0;
                let o = ring
                    .lookup_with(start, id, |h| {
                        out.push(Visit { resource: server[h], net_ns: 2 * rtt, kind: VisitKind::ChordHop });
                        hops += 1;
                    })
                    .expect("start in range");
                debug_assert_eq!(o, owner);
                out.push(io_visit(server[owner]));
                hops
            }
            Placement::OneHop { dir, ring, server } => {
                let (owner, id) = ring_draw(ring, rng);
                let start = rng.gen_range(0..ring.len());
                let (o, hops) = dir.lookup(start, id).expect("start in range");
                debug_assert_eq!(o, owner);
                if hops == 1 {
                    out.push(lookup_visit(server[start]));
                }
                out.push(io_visit(server[owner]));
                hops
            }
            Placement::MetaFlow { leaves } => {
                let resource = leaves[rng.gen_range(0..leaves.len())];
                out.push(Visit { resource, net_ns: owner_net, kind: VisitKind::IoNat });
                0
            }
        }
    }

    /// Mean lookup RPCs over `n` sampled operations.
    pub fn sample_mean_hops(&self, seed: u64, n: u64) -> f64 {
        let mut rng = stream_rng(seed, STREAM_ORACLE);
        let mut buf = Vec::new();
        let total: u64 = (0..n).map(|_| u64::from(self.plan(&mut rng, &mut buf))).sum();
        total as f64 / n as f64
    }

    /// Throughput at which the busiest resource saturates, from `n` sampled
    /// operations: capacity over the largest mean CPU demand per operation.
    pub fn bottleneck_bound(&self, seed: u64, n: u64) -> f64 {
        let mut rng = stream_rng(seed, STREAM_ORACLE);
        let mut buf = Vec::new();
        let mut demand = vec![0u64; self.names.len()];
        for _ in 0..n {
            self.plan(&mut rng, &mut buf);
            for v in &buf {
                demand[v.resource as usize] += self.visit_cpu_ns(v);
            }
        }
        let worst = demand.into_iter().max().unwrap_or(0) as f64 / n as f64;
        if worst == 0.0 {
            f64::INFINITY
        } else {
            1e9 / worst
        }
    }
}

/// Server index of each ring node; colliding names share the first one.
fn ring_servers(ring: &ChordRing, names: &[String]) -> Vec<u32> {
    let mut server = vec![u32::MAX; ring.len()];
    for (i, n) in names.iter().enumerate() {
        let idx = ring.successor_index(ring_position(n));
        if server[idx] == u32::MAX {
            server[idx] = i as u32;
        }
    }
    server
}

/// A ring node chosen uniformly and an identifier uniform in its arc.
fn ring_draw(ring: &ChordRing, rng: &mut ChaCha8Rng) -> (usize, MetaDataId) {
    let nodes = ring.node_ids();
    let o = rng.gen_range(0..nodes.len());
    let pred = nodes[(o + nodes.len() - 1) % nodes.len()];
    let arc = match nodes[o].wrapping_sub(pred) {
        0 => 1u64 << 32,
        a => u64::from(a),
    };
    let back = rng.gen_range(0..arc);
    (o, MetaDataId((u64::from(nodes[o]) + (1u64 << 32) - back) as u32))
}

/// Builds the overlay and inserts uniform identifiers: a fixed count, or
/// until every eligible leaf holds data.
pub fn preload(cfg: &ScenarioConfig, topo: &metaflow_core::Topology) -> Result<OverlayTree, SimError> {
    let mut tree = map_topology(topo, cfg.overlay.clone())?;
    tree.bootstrap()?;
    let mut rng = stream_rng(cfg.seed()?, STREAM_PRELOAD);
    let eligible = tree.leaves().filter(|l| l.eligible).count();
    match cfg.workload.preload_objects {
        Some(n) => {
            for _ in 0..n {
                tree.insert_object(MetaDataId(rng.gen()))?;
            }
        }
        None => {
            let mut busy = tree.busy_leaves().count();
            while busy < eligible {
                match tree.insert_object(MetaDataId(rng.gen())) {
                    Ok(out) => busy += usize::from(out.split.is_some()),
                    Err(OverlayError::CapacityExhausted(_)) => break,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(tree)
}
