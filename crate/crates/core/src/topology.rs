//! Physical storage-cluster topologies: two/three-tier trees and pod-based fat trees.
//!
//! Every generated topology also carries one application-cluster switch
//! (`app0`) linked to all core switches; it is the entry point clients use to
//! reach the storage cluster.
//!
//! Parameter mapping for tier trees: `core_fanout` is the number of children of
//! the single core switch, `agg_fanout` the number of edge switches under each
//! aggregation switch (ignored for two tiers), and `edge_fanout` the number of
//! servers under each edge switch. A two-tier `(4, _, 4)` tree therefore has
//! 1 core, 4 edge switches and 16 servers. Tier-tree switches get
//! `max(fanout + 1, 48)` ports so servers can be joined later.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("topology invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Server,
    Switch,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Application,
    Core,
    Aggregation,
    Edge,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Application => "application",
            Layer::Core => "core",
            Layer::Aggregation => "aggregation",
            Layer::Edge => "edge",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    TwoTier,
    ThreeTier,
    FatTree,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::TwoTier => "two-tier",
            TopologyKind::ThreeTier => "three-tier",
            TopologyKind::FatTree => "fat-tree",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalNode {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    /// Switch layer; `None` for servers.
    pub layer: Option<Layer>,
    /// Switch port count; `None` for servers.
    pub port_count: Option<u32>,
    pub pod: Option<usize>,
    /// Physical IPv4 address (servers only).
    pub addr: Option<u32>,
    /// Inactive servers exist physically but never receive partitions.
    pub active: bool,
}

impl PhysicalNode {
    pub fn is_server(&self) -> bool {
        self.kind == NodeKind::Server
    }

    pub fn is_switch(&self) -> bool {
        self.kind == NodeKind::Switch
    }
}

#[derive(Clone, Debug)]
pub struct Topology {
    kind: TopologyKind,
    nodes: Vec<PhysicalNode>,
    links: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<NodeId>>,
    by_name: HashMap<String, NodeId>,
}

const TIER_SWITCH_PORTS: u32 = 48;

/// First server address; server `i` gets `192.168.0.1 + i`.
const SERVER_BASE_ADDR: u32 = 0xc0a8_0001;

impl Topology {
    pub fn empty(kind: TopologyKind) -> Self {
        Topology { kind, nodes: Vec::new(), links: Vec::new(), adjacency: Vec::new(), by_name: HashMap::new() }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn nodes(&self) -> &[PhysicalNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &PhysicalNode {
        &self.nodes[id.0]
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id.0]
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn servers(&self) -> impl Iterator<Item = &PhysicalNode> {
        self.nodes.iter().filter(|n| n.is_server())
    }

    pub fn active_servers(&self) -> impl Iterator<Item = &PhysicalNode> {
        self.servers().filter(|n| n.active)
    }

    pub fn switches_in(&self, layer: Layer) -> impl Iterator<Item = &PhysicalNode> {
        self.nodes.iter().filter(move |n| n.layer == Some(layer))
    }

    pub fn application_switch(&self) -> Option<NodeId> {
        self.switches_in(Layer::Application).next().map(|n| n.id)
    }

    /// Links from a node to a switch one layer up (towards the core).
    pub fn uplinks(&self, id: NodeId) -> Vec<NodeId> {
        let rank = self.rank(id);
        self.neighbors(id).iter().copied().filter(|&n| self.rank(n) < rank && self.rank(n) > 0).collect()
    }

    /// Depth rank: application 0, core 1, aggregation 2, edge 3, server 4.
    fn rank(&self, id: NodeId) -> u8 {
        match self.nodes[id.0].layer {
            Some(Layer::Application) => 0,
            Some(Layer::Core) => 1,
            Some(Layer::Aggregation) => 2,
            Some(Layer::Edge) => 3,
            None => 4,
        }
    }

    /// Number of links a request crosses from a client to any storage server:
    /// client to application switch, then down through every storage layer.
    pub fn client_path_links(&self) -> u32 {
        match self.kind {
            TopologyKind::TwoTier => 4,
            TopologyKind::ThreeTier | TopologyKind::FatTree => 5,
        }
    }

    /// Marks only the first `count` servers (by id) as active.
    pub fn with_active_servers(mut self, count: usize) -> Result<Self, TopologyError> {
        let total = self.servers().count();
        if count == 0 || count > total {
            return Err(TopologyError::InvalidArgument(format!(
                "active server count {count} outside 1..={total}"
            )));
        }
        let mut seen = 0;
        for n in self.nodes.iter_mut().filter(|n| n.kind == NodeKind::Server) {
            n.active = seen < count;
            seen += 1;
        }
        Ok(self)
    }

    pub fn add_switch(
        &mut self,
        name: impl Into<String>,
        layer: Layer,
        port_count: u32,
        pod: Option<usize>,
    ) -> Result<NodeId, TopologyError> {
        self.push(name.into(), NodeKind::Switch, Some(layer), Some(port_count), pod, None)
    }

    pub fn add_server(&mut self, name: impl Into<String>, pod: Option<usize>) -> Result<NodeId, TopologyError> {
        let index = self.servers().count() as u32;
        self.add_server_with_addr(name, pod, SERVER_BASE_ADDR + index)
    }

    pub fn add_server_with_addr(
        &mut self,
        name: impl Into<String>,
        pod: Option<usize>,
        addr: u32,
    ) -> Result<NodeId, TopologyError> {
        self.push(name.into(), NodeKind::Server, None, None, pod, Some(addr))
    }

    fn push(
        &mut self,
        name: String,
        kind: NodeKind,
        layer: Option<Layer>,
        port_count: Option<u32>,
        pod: Option<usize>,
        addr: Option<u32>,
    ) -> Result<NodeId, TopologyError> {
        if self.by_name.contains_key(&name) {
            return Err(TopologyError::DuplicateNode(name));
        }
        let id = NodeId(self.nodes.len());
        self.by_name.insert(name.clone(), id);
        self.nodes.push(PhysicalNode { id, name, kind, layer, port_count, pod, addr, active: true });
        self.adjacency.push(Vec::new());
        Ok(id)
    }

    pub fn link(&mut self, a: NodeId, b: NodeId) {
        self.links.push((a, b));
        self.adjacency[a.0].push(b);
        self.adjacency[b.0].push(a);
    }

    fn add_application_switch(&mut self) {
        let cores: Vec<NodeId> = self.switches_in(Layer::Core).map(|n| n.id).collect();
        let ports = (cores.len() as u32 + 1).max(2);
        let app = self.add_switch("app0", Layer::Application, ports, None).expect("fresh name");
        for c in cores {
            self.link(app, c);
        }
    }
}

/// Builds a two- or three-tier tree; see the module docs for the parameter mapping.
pub fn build_tier_tree(
    core_fanout: usize,
    agg_fanout: usize,
    edge_fanout: usize,
    tiers: u8,
) -> Result<Topology, TopologyError> {
    if core_fanout == 0 || agg_fanout == 0 || edge_fanout == 0 {
        return Err(TopologyError::InvalidArgument("fanouts must be >= 1".into()));
    }
    let kind = match tiers {
        2 => TopologyKind::TwoTier,
        3 => TopologyKind::ThreeTier,
        _ => return Err(TopologyError::InvalidArgument(format!("tiers must be 2 or 3, got {tiers}"))),
    };
    let ports = |fanout: usize| (fanout as u32 + 1).max(TIER_SWITCH_PORTS);
    let mut t = Topology::empty(kind);
    let core = t.add_switch("core0", Layer::Core, ports(core_fanout), None)?;
    let edge_parents: Vec<NodeId> = if tiers == 3 {
        (0..core_fanout)
            .map(|i| {
                let a = t.add_switch(format!("agg{i}"), Layer::Aggregation, ports(agg_fanout), None)?;
                t.link(core, a);
                Ok(a)
            })
            .collect::<Result<_, TopologyError>>()?
    } else {
        vec![core]
    };
    let per_parent = if tiers == 3 { agg_fanout } else { core_fanout };
    let mut edge_no = 0;
    let mut server_no = 0;
    for parent in edge_parents {
        for _ in 0..per_parent {
            let e = t.add_switch(format!("edge{edge_no}"), Layer::Edge, ports(edge_fanout), None)?;
            edge_no += 1;
            t.link(parent, e);
            for _ in 0..edge_fanout {
                let s = t.add_server(format!("server{server_no}"), None)?;
                server_no += 1;
                t.link(e, s);
            }
        }
    }
    t.add_application_switch();
    Ok(t)
}

/// Builds a pod-based fat tree with an explicit core count.
///
/// Each pod holds `n/2` aggregation and `n/2` edge switches; every edge switch
/// links to all aggregation switches of its pod and serves `n/2` servers. Core
/// switch `c` links to aggregation switch `c mod n/2` of every pod.
pub fn build_fat_tree(n_ports: u32, pods: usize, core_count: usize) -> Result<Topology, TopologyError> {
    if n_ports % 2 != 0 {
        return Err(TopologyError::InvalidArgument(format!("port count {n_ports} must be even")));
    }
    if n_ports < 4 {
        return Err(TopologyError::InvalidArgument(format!("port count {n_ports} must be >= 4")));
    }
    if pods == 0 || core_count == 0 {
        return Err(TopologyError::InvalidArgument("pods and core count must be >= 1".into()));
    }
    let half = (n_ports / 2) as usize;
    let mut t = Topology::empty(TopologyKind::FatTree);
    let cores: Vec<NodeId> = (0..core_count)
        .map(|i| t.add_switch(format!("core{i}"), Layer::Core, n_ports, None))
        .collect::<Result<_, _>>()?;
    let mut server_no = 0;
    for pod in 0..pods {
        let aggs: Vec<NodeId> = (0..half)
            .map(|a| t.add_switch(format!("agg{}", pod * half + a), Layer::Aggregation, n_ports, Some(pod)))
            .collect::<Result<_, _>>()?;
        for (c, &core) in cores.iter().enumerate() {
            t.link(core, aggs[c % half]);
        }
        for e in 0..half {
            let edge = t.add_switch(format!("edge{}", pod * half + e), Layer::Edge, n_ports, Some(pod))?;
            for &a in &aggs {
                t.link(a, edge);
            }
            for _ in 0..half {
                let s = t.add_server(format!("server{server_no}"), Some(pod))?;
                server_no += 1;
                t.link(edge, s);
            }
        }
    }
    t.add_application_switch();
    Ok(t)
}

/// Checks every structural invariant; an empty result means the topology is valid.
pub fn validate(t: &Topology) -> Vec<String> {
    let mut out = Vec::new();
    for n in t.nodes() {
        let degree = t.neighbors(n.id).len();
        match n.kind {
            NodeKind::Server => {
                if n.port_count.is_some() {
                    out.push(format!("server {} declares a port count", n.name));
                }
                if degree != 1 {
                    out.push(format!("server {} has {degree} uplinks", n.name));
                } else {
                    let up = t.node(t.neighbors(n.id)[0]);
                    if up.layer != Some(Layer::Edge) {
                        out.push(format!("server {} is attached to non-edge node {}", n.name, up.name));
                    }
                }
            }
            NodeKind::Switch => {
                match n.port_count {
                    Some(p) if p >= 2 => {
                        if degree as u32 > p {
                            out.push(format!("switch {} uses {degree} links but has {p} ports", n.name));
                        }
                    }
                    Some(p) => out.push(format!("switch {} has only {p} ports", n.name)),
                    None => out.push(format!("switch {} has no port count", n.name)),
                }
                if n.layer == Some(Layer::Aggregation) && t.kind() == TopologyKind::TwoTier {
                    out.push(format!("two-tier tree has aggregation switch {}", n.name));
                }
            }
        }
    }
    let cores = t.switches_in(Layer::Core).count();
    if cores == 0 {
        out.push("no core switch".into());
    }
    match t.kind() {
        TopologyKind::TwoTier | TopologyKind::ThreeTier => {
            if cores > 1 {
                out.push(format!("tier tree has {cores} core switches"));
            }
            for n in t.nodes().iter().filter(|n| matches!(n.layer, Some(Layer::Aggregation | Layer::Edge))) {
                let ups = t.uplinks(n.id).len();
                if ups != 1 {
                    out.push(format!("switch {} has {ups} uplinks", n.name));
                }
            }
        }
        TopologyKind::FatTree => {
            let mut pod_aggs: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
            for a in t.switches_in(Layer::Aggregation) {
                match a.pod {
                    Some(p) => pod_aggs.entry(p).or_default().push(a.id),
                    None => out.push(format!("aggregation switch {} has no pod", a.name)),
                }
            }
            for e in t.switches_in(Layer::Edge) {
                let Some(pod) = e.pod else {
                    out.push(format!("edge switch {} has no pod", e.name));
                    continue;
                };
                for a in pod_aggs.get(&pod).into_iter().flatten() {
                    if !t.neighbors(e.id).contains(a) {
                        out.push(format!("edge switch {} is not linked to {}", e.name, t.node(*a).name));
                    }
                }
            }
        }
    }
    let unreachable = unreachable_nodes(t);
    if !unreachable.is_empty() {
        out.push(format!("unreachable nodes: {}", unreachable.join(", ")));
    }
    out
}

fn unreachable_nodes(t: &Topology) -> Vec<String> {
    let Some(start) = t.switches_in(Layer::Core).next().map(|n| n.id) else {
        return Vec::new();
    };
    let mut seen = vec![false; t.nodes().len()];
    let mut queue = VecDeque::from([start]);
    seen[start.0] = true;
    while let Some(n) = queue.pop_front() {
        for &m in t.neighbors(n) {
            if !seen[m.0] {
                seen[m.0] = true;
                queue.push_back(m);
            }
        }
    }
    t.nodes().iter().filter(|n| !seen[n.id.0]).map(|n| n.name.clone()).collect()
}

/// Structured-text form of a topology: a generator kind with its parameters,
/// or explicit node and link lists for hand-built fixtures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: Option<TopologyKind>,
    pub core_fanout: Option<usize>,
    pub agg_fanout: Option<usize>,
    pub edge_fanout: Option<usize>,
    pub ports: Option<u32>,
    pub pods: Option<usize>,
    pub cores: Option<usize>,
    pub active_servers: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    /// Switch layer; omit for servers.
    pub layer: Option<Layer>,
    pub ports: Option<u32>,
    pub pod: Option<usize>,
    /// Server address as a dotted quad.
    pub addr: Option<String>,
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, TopologyError> {
        let kind = self.kind.ok_or_else(|| TopologyError::InvalidArgument("topology kind missing".into()))?;
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| TopologyError::InvalidArgument(format!("{kind} topology needs `{what}`")))
        };
        let t = if !self.nodes.is_empty() {
            self.build_explicit(kind)?
        } else {
            match kind {
                TopologyKind::TwoTier => {
                    build_tier_tree(need(self.core_fanout, "core_fanout")?, 1, need(self.edge_fanout, "edge_fanout")?, 2)?
                }
                TopologyKind::ThreeTier => build_tier_tree(
                    need(self.core_fanout, "core_fanout")?,
                    need(self.agg_fanout, "agg_fanout")?,
                    need(self.edge_fanout, "edge_fanout")?,
                    3,
                )?,
                TopologyKind::FatTree => build_fat_tree(
                    self.ports.ok_or_else(|| TopologyError::InvalidArgument("fat-tree needs `ports`".into()))?,
                    need(self.pods, "pods")?,
                    need(self.cores, "cores")?,
                )?,
            }
        };
        let t = match self.active_servers {
            Some(n) => t.with_active_servers(n)?,
            None => t,
        };
        let violations = validate(&t);
        if violations.is_empty() {
            Ok(t)
        } else {
            Err(TopologyError::Invalid(violations))
        }
    }

    fn build_explicit(&self, kind: TopologyKind) -> Result<Topology, TopologyError> {
        let mut t = Topology::empty(kind);
        for n in &self.nodes {
            match n.layer {
                Some(layer) => {
                    t.add_switch(n.name.clone(), layer, n.ports.unwrap_or(48), n.pod)?;
                }
                None => {
                    match &n.addr {
                        Some(a) => {
                            let addr: Ipv4Addr = a.parse().map_err(|_| {
                                TopologyError::InvalidArgument(format!("bad address `{a}` for {}", n.name))
                            })?;
                            t.add_server_with_addr(n.name.clone(), n.pod, u32::from(addr))?
                        }
                        None => t.add_server(n.name.clone(), n.pod)?,
                    };
                }
            }
        }
        for (a, b) in &self.links {
            let a = t.find(a).ok_or_else(|| TopologyError::UnknownNode(a.clone()))?;
            let b = t.find(b).ok_or_else(|| TopologyError::UnknownNode(b.clone()))?;
            t.link(a, b);
        }
        if t.application_switch().is_none() {
            t.add_application_switch();
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(t: &Topology, layer: Layer) -> usize {
        t.switches_in(layer).count()
    }

    #[test]
    fn three_tier_small() {
        let t = build_tier_tree(2, 2, 2, 3).unwrap();
        assert_eq!(count(&t, Layer::Core), 1);
        assert_eq!(count(&t, Layer::Aggregation), 2);
        assert_eq!(count(&t, Layer::Edge), 4);
        assert_eq!(t.servers().count(), 8);
        // 14 storage links plus the application switch uplink to the core.
        assert_eq!(t.links().len(), 15);
        assert!(validate(&t).is_empty());
    }

    #[test]
    fn testbed_tree_has_200_servers() {
        let t = build_tier_tree(2, 5, 20, 3).unwrap();
        assert_eq!(t.servers().count(), 200);
        assert_eq!(count(&t, Layer::Aggregation), 2);
    }

    #[test]
    fn two_tier_mapping() {
        let t = build_tier_tree(4, 1, 4, 2).unwrap();
        assert_eq!(count(&t, Layer::Core), 1);
        assert_eq!(count(&t, Layer::Aggregation), 0);
        assert_eq!(count(&t, Layer::Edge), 4);
        assert_eq!(t.servers().count(), 16);
        let t = build_tier_tree(1, 1, 4, 2).unwrap();
        assert_eq!(count(&t, Layer::Edge), 1);
        assert_eq!(t.servers().count(), 4);
    }

    #[test]
    fn bad_tier_arguments() {
        assert!(matches!(build_tier_tree(2, 2, 2, 4), Err(TopologyError::InvalidArgument(_))));
        assert!(matches!(build_tier_tree(0, 2, 2, 3), Err(TopologyError::InvalidArgument(_))));
    }

    #[test]
    fn four_port_pod() {
        let t = build_fat_tree(4, 1, 4).unwrap();
        assert_eq!(count(&t, Layer::Aggregation), 2);
        assert_eq!(count(&t, Layer::Edge), 2);
        assert_eq!(count(&t, Layer::Core), 4);
        assert_eq!(t.servers().count(), 4);
        assert!(validate(&t).is_empty());
    }

    #[test]
    fn two_pod_four_port() {
        let t = build_fat_tree(4, 2, 4).unwrap();
        assert_eq!(t.servers().count(), 8);
        let storage_switches = t.nodes().iter().filter(|n| n.is_switch() && n.layer != Some(Layer::Application)).count();
        assert_eq!(storage_switches, 12);
    }

    #[test]
    fn simulator_scale_fat_tree() {
        let t = build_fat_tree(32, 8, 32).unwrap();
        assert_eq!(t.servers().count(), 2048);
        assert_eq!(count(&t, Layer::Core), 32);
        assert_eq!(count(&t, Layer::Edge), 128);
        assert!(validate(&t).is_empty());
        let t = t.with_active_servers(2000).unwrap();
        assert_eq!(t.active_servers().count(), 2000);
    }

    #[test]
    fn odd_ports_rejected() {
        assert!(matches!(build_fat_tree(5, 1, 4), Err(TopologyError::InvalidArgument(_))));
    }

    #[test]
    fn injected_double_uplink() {
        let mut t = build_tier_tree(2, 2, 2, 3).unwrap();
        let s3 = t.find("server3").unwrap();
        let e0 = t.find("edge0").unwrap();
        t.link(e0, s3);
        let v = validate(&t);
        assert!(v.contains(&"server server3 has 2 uplinks".to_string()), "{v:?}");
    }

    #[test]
    fn injected_disconnected_pod() {
        let mut t = Topology::empty(TopologyKind::FatTree);
        let c = t.add_switch("core0", Layer::Core, 4, None).unwrap();
        let a0 = t.add_switch("agg0", Layer::Aggregation, 4, Some(0)).unwrap();
        let e0 = t.add_switch("edge0", Layer::Edge, 4, Some(0)).unwrap();
        let s0 = t.add_server("server0", Some(0)).unwrap();
        let a1 = t.add_switch("agg1", Layer::Aggregation, 4, Some(1)).unwrap();
        let e1 = t.add_switch("edge1", Layer::Edge, 4, Some(1)).unwrap();
        let s1 = t.add_server("server1", Some(1)).unwrap();
        t.link(c, a0);
        t.link(a0, e0);
        t.link(e0, s0);
        t.link(a1, e1);
        t.link(e1, s1);
        let v = validate(&t);
        let msg = v.iter().find(|m| m.starts_with("unreachable")).expect("reported");
        assert!(msg.contains("agg1") && msg.contains("edge1") && msg.contains("server1"));
    }

    #[test]
    fn spec_round_trip_through_toml() {
        let spec = TopologySpec {
            kind: Some(TopologyKind::FatTree),
            ports: Some(4),
            pods: Some(2),
            cores: Some(4),
            ..Default::default()
        };
        let text = toml::to_string(&spec).unwrap();
        let back: TopologySpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build().unwrap().servers().count(), 8);
    }

    #[test]
    fn explicit_spec() {
        let text = r#"
            kind = "two-tier"
            nodes = [
              { name = "SwitchC", layer = "core", ports = 4 },
              { name = "SwitchA", layer = "edge", ports = 4 },
              { name = "Server1", addr = "192.168.0.1" },
            ]
            links = [["SwitchC", "SwitchA"], ["SwitchA", "Server1"]]
        "#;
        let spec: TopologySpec = toml::from_str(text).unwrap();
        let t = spec.build().unwrap();
        assert_eq!(t.node(t.find("Server1").unwrap()).addr, Some(0xc0a8_0001));
        assert!(t.application_switch().is_some());
    }
}
