//! The controller's logical B-tree over a physical topology.
//!
//! Core switches collapse into the root, each aggregation group (one switch in
//! a tier tree, a whole pod in a fat tree) becomes one inner node, each edge
//! switch an inner node, and each server a leaf. Inner nodes keep an interval
//! map from identifier ranges to children; leaves own a contiguous range held
//! as ordered CIDR blocks with exact per-block object counts.

mod maintenance;
mod split;
mod tables;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::{cover_len, cover_span, CidrBlock, MetaDataId, SPACE};
use crate::topology::{validate, Layer, NodeId, Topology, TopologyError, TopologyKind};

pub use maintenance::ReplacementOutcome;
pub use split::{plan_split, SplitOutcome, SplitPlan};
pub use tables::{render_table, Action, FlowEntry, FlowTable, FlowTableDelta};

pub const DEFAULT_PORT: u16 = 9000;
pub const DEFAULT_TABLE_CAPACITY: usize = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverlayError {
    #[error("invalid topology: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("invalid overlay config: {0}")]
    InvalidConfig(String),
    #[error("tree is already bootstrapped")]
    AlreadyBootstrapped,
    #[error("tree is not bootstrapped")]
    NotBootstrapped,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("`{0}` is not a switch in the tree")]
    UnknownSwitch(String),
    #[error("`{0}` is not a leaf")]
    NotALeaf(String),
    #[error("leaf `{0}` is not busy")]
    NotBusy(String),
    #[error("capacity exhausted: no idle leaf can take load from `{0}`; add storage servers")]
    CapacityExhausted(String),
    #[error("unsplittable hotspot on `{leaf}`: objects concentrated on {id}")]
    UnsplittableHotspot { leaf: String, id: MetaDataId },
    #[error("flow table of `{switch}` would hold {entries} entries (capacity {capacity})")]
    TableCapacityExceeded { switch: String, entries: usize, capacity: usize },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid join: {0}")]
    InvalidJoin(String),
    #[error("no object {0} stored")]
    NotFound(MetaDataId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlayConfig {
    pub leaf_capacity: u64,
    pub split_lo: f64,
    pub split_hi: f64,
    /// Disables escalation: a split needs an idle sibling under the same parent.
    pub strict: bool,
    pub table_capacity: usize,
    pub port: u16,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        OverlayConfig {
            leaf_capacity: 10_000,
            split_lo: 0.40,
            split_hi: 0.60,
            strict: false,
            table_capacity: DEFAULT_TABLE_CAPACITY,
            port: DEFAULT_PORT,
        }
    }
}

impl OverlayConfig {
    pub fn check(&self) -> Result<(), OverlayError> {
        if self.leaf_capacity == 0 {
            return Err(OverlayError::InvalidConfig("leaf_capacity must be >= 1".into()));
        }
        if !(self.split_lo > 0.0 && self.split_lo <= self.split_hi && self.split_hi < 1.0) {
            return Err(OverlayError::InvalidConfig(format!(
                "split thresholds need 0 < lo <= hi < 1, got {} and {}",
                self.split_lo, self.split_hi
            )));
        }
        if self.table_capacity == 0 {
            return Err(OverlayError::InvalidConfig("table_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct LogicalId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Root,
    Inner,
    Leaf,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeState {
    Idle,
    Busy,
    /// A failed leaf; never reactivated.
    Failed,
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeState::Idle => "idle",
            NodeState::Busy => "busy",
            NodeState::Failed => "failed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Route {
    pub end: u64,
    pub child: LogicalId,
}

#[derive(Clone, Debug)]
pub struct OverlayNode {
    pub id: LogicalId,
    pub role: Role,
    pub state: NodeState,
    /// Physical switches (or the single server) backing this node, sorted.
    pub physical: Vec<NodeId>,
    pub parent: Option<LogicalId>,
    pub children: Vec<LogicalId>,
    /// Leaf may be activated (its server is in the active set).
    pub eligible: bool,
    pub(crate) routes: BTreeMap<u32, Route>,
    pub(crate) blocks: Vec<(CidrBlock, u64)>,
    pub(crate) objects: BTreeMap<u32, u32>,
    pub(crate) total: u64,
}

impl OverlayNode {
    fn new(id: LogicalId, role: Role, physical: Vec<NodeId>, parent: Option<LogicalId>) -> Self {
        OverlayNode {
            id,
            role,
            state: NodeState::Idle,
            physical,
            parent,
            children: Vec::new(),
            eligible: true,
            routes: BTreeMap::new(),
            blocks: Vec::new(),
            objects: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.role == Role::Leaf
    }

    /// Ordered `(block, object count)` pairs; empty unless a busy leaf.
    pub fn blocks(&self) -> &[(CidrBlock, u64)] {
        &self.blocks
    }

    pub fn object_count(&self) -> u64 {
        self.total
    }

    /// Interval routes `(start, end, child)` of a non-leaf node.
    pub fn routes(&self) -> impl Iterator<Item = (u64, u64, LogicalId)> + '_ {
        self.routes.iter().map(|(&s, r)| (u64::from(s), r.end, r.child))
    }

    /// Starts of the routed intervals, the node's partition values.
    pub fn partition_values(&self) -> Vec<MetaDataId> {
        self.routes.keys().map(|&s| MetaDataId(s)).collect()
    }

    /// Leaf range `[start, end)`; `None` when the leaf owns nothing.
    pub fn range(&self) -> Option<(u64, u64)> {
        let first = self.blocks.first()?;
        let last = self.blocks.last()?;
        Some((first.0.start(), last.0.end()))
    }

    fn idle_candidate(&self) -> bool {
        self.is_leaf() && self.state == NodeState::Idle && self.eligible
    }
}

/// One structural mutation, as written to the controller event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerEvent {
    pub seq: u64,
    pub op: String,
    pub node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub deltas: Vec<DeltaRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub switch: String,
    pub added: Vec<String>,
    pub removed: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct InsertOutcome {
    pub leaf: LogicalId,
    pub split: Option<SplitOutcome>,
}

#[derive(Clone, Debug)]
pub struct OverlayTree {
    pub(crate) topo: Topology,
    pub(crate) cfg: OverlayConfig,
    pub(crate) nodes: Vec<OverlayNode>,
    pub(crate) root: LogicalId,
    depth: u8,
    pub(crate) by_physical: HashMap<NodeId, LogicalId>,
    bootstrapped: bool,
    pub(crate) events: Vec<ControllerEvent>,
}

/// Builds the all-idle logical tree for a valid topology.
pub fn map_topology(t: &Topology, cfg: OverlayConfig) -> Result<OverlayTree, OverlayError> {
    cfg.check()?;
    let violations = validate(t);
    if !violations.is_empty() {
        return Err(OverlayError::InvalidTopology(violations));
    }
    let mut tree = OverlayTree {
        topo: t.clone(),
        cfg,
        nodes: Vec::new(),
        root: LogicalId(0),
        depth: match t.kind() {
            TopologyKind::TwoTier => 3,
            TopologyKind::ThreeTier | TopologyKind::FatTree => 4,
        },
        by_physical: HashMap::new(),
        bootstrapped: false,
        events: Vec::new(),
    };
    let cores: Vec<NodeId> = t.switches_in(Layer::Core).map(|n| n.id).collect();
    let root = tree.push(Role::Root, cores, None);
    tree.root = root;

    if t.kind() != TopologyKind::TwoTier {
        let mut pod_groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for a in t.switches_in(Layer::Aggregation) {
            match (t.kind(), a.pod) {
                (TopologyKind::FatTree, Some(pod)) => pod_groups.entry(pod).or_default().push(a.id),
                _ => {
                    tree.push(Role::Inner, vec![a.id], Some(root));
                }
            }
        }
        for (_, members) in pod_groups {
            tree.push(Role::Inner, members, Some(root));
        }
    }
    let edges: Vec<NodeId> = t.switches_in(Layer::Edge).map(|n| n.id).collect();
    for e in edges {
        let parent = tree.parent_of_switch(e)?;
        tree.push(Role::Inner, vec![e], Some(parent));
    }
    let servers: Vec<(NodeId, bool)> = t.servers().map(|s| (s.id, s.active)).collect();
    for (s, active) in servers {
        let edge = t.neighbors(s)[0];
        let parent = tree.by_physical[&edge];
        let leaf = tree.push(Role::Leaf, vec![s], Some(parent));
        tree.nodes[leaf.0].eligible = active;
    }
    Ok(tree)
}

impl OverlayTree {
    fn push(&mut self, role: Role, mut physical: Vec<NodeId>, parent: Option<LogicalId>) -> LogicalId {
        physical.sort();
        let id = LogicalId(self.nodes.len());
        for &p in &physical {
            self.by_physical.insert(p, id);
        }
        self.nodes.push(OverlayNode::new(id, role, physical, parent));
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        id
    }

    /// Logical parent of an aggregation or edge switch, via its uplinks.
    fn parent_of_switch(&self, sw: NodeId) -> Result<LogicalId, OverlayError> {
        let up = self.topo.uplinks(sw);
        let first = up.first().ok_or_else(|| OverlayError::InvalidTopology(vec![format!(
            "switch {} has no uplink",
            self.topo.node(sw).name
        )]))?;
        Ok(self.by_physical[first])
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn config(&self) -> &OverlayConfig {
        &self.cfg
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn root(&self) -> LogicalId {
        self.root
    }

    pub fn node(&self, id: LogicalId) -> &OverlayNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[OverlayNode] {
        &self.nodes
    }

    pub fn is_bootstrapped(&self) -> bool {
        self.bootstrapped
    }

    /// Logical node backed by a physical switch or server.
    pub fn logical_of(&self, physical: NodeId) -> Option<LogicalId> {
        self.by_physical.get(&physical).copied()
    }

    pub fn leaf_by_name(&self, name: &str) -> Result<LogicalId, OverlayError> {
        let p = self.topo.find(name).ok_or_else(|| OverlayError::UnknownNode(name.to_string()))?;
        let l = self.logical_of(p).ok_or_else(|| OverlayError::UnknownNode(name.to_string()))?;
        if !self.nodes[l.0].is_leaf() {
            return Err(OverlayError::NotALeaf(name.to_string()));
        }
        Ok(l)
    }

    /// Physical server backing a leaf.
    pub fn server_of(&self, leaf: LogicalId) -> NodeId {
        self.nodes[leaf.0].physical[0]
    }

    /// Display name: the physical node name, or the member list for groups.
    pub fn name_of(&self, id: LogicalId) -> String {
        let names: Vec<&str> = self.nodes[id.0].physical.iter().map(|&p| self.topo.node(p).name.as_str()).collect();
        names.join(",")
    }

    pub fn leaves(&self) -> impl Iterator<Item = &OverlayNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn busy_leaves(&self) -> impl Iterator<Item = &OverlayNode> {
        self.leaves().filter(|n| n.state == NodeState::Busy)
    }

    pub fn events(&self) -> &[ControllerEvent] {
        &self.events
    }

    /// The event log, one JSON object per line.
    pub fn event_log(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Activates the first eligible leaf and its ancestors; the leaf owns everything.
    pub fn bootstrap(&mut self) -> Result<(), OverlayError> {
        if self.bootstrapped {
            return Err(OverlayError::AlreadyBootstrapped);
        }
        let leaf = self
            .leaves()
            .find(|n| n.idle_candidate())
            .map(|n| n.id)
            .ok_or_else(|| OverlayError::CapacityExhausted("bootstrap".into()))?;
        self.activate_with(leaf, vec![(CidrBlock::full(), 0)], BTreeMap::new());
        self.assign_path(leaf, 0, SPACE, None);
        self.bootstrapped = true;
        let deltas = self.switch_tables_of_path(leaf);
        self.log("bootstrap", leaf, None, deltas);
        Ok(())
    }

    /// Loads an explicit partition assignment, e.g. a hand-written fixture.
    ///
    /// Each leaf's blocks must form one contiguous range and all ranges together
    /// must tile the identifier space exactly once.
    pub fn from_assignments(
        t: &Topology,
        cfg: OverlayConfig,
        assignments: &[(String, Vec<CidrBlock>)],
    ) -> Result<OverlayTree, OverlayError> {
        let mut tree = map_topology(t, cfg)?;
        let mut spans = Vec::new();
        for (name, blocks) in assignments {
            let leaf = tree.leaf_by_name(name)?;
            let mut blocks = blocks.clone();
            blocks.sort();
            if blocks.is_empty() {
                return Err(OverlayError::InvalidAssignment(format!("{name} has no blocks")));
            }
            for w in blocks.windows(2) {
                if w[0].end() != w[1].start() {
                    return Err(OverlayError::InvalidAssignment(format!(
                        "{name}: blocks {} and {} are not contiguous",
                        w[0], w[1]
                    )));
                }
            }
            if tree.nodes[leaf.0].state != NodeState::Idle {
                return Err(OverlayError::InvalidAssignment(format!("{name} assigned twice")));
            }
            spans.push((blocks[0].start(), blocks[blocks.len() - 1].end(), name.clone()));
            tree.activate_with(leaf, blocks.into_iter().map(|b| (b, 0)).collect(), BTreeMap::new());
        }
        spans.sort();
        let mut cursor = 0u64;
        for (s, e, name) in &spans {
            if *s != cursor {
                return Err(OverlayError::InvalidAssignment(format!(
                    "gap or overlap at {} (before {name})",
                    MetaDataId(*s as u32)
                )));
            }
            cursor = *e;
        }
        if cursor != SPACE {
            return Err(OverlayError::InvalidAssignment("assignments do not reach the end of the space".into()));
        }
        for (name, _) in assignments {
            let leaf = tree.leaf_by_name(name)?;
            let (s, e) = tree.nodes[leaf.0].range().expect("assigned");
            tree.assign_path(leaf, s, e, None);
        }
        for n in 0..tree.nodes.len() {
            let id = LogicalId(n);
            if !tree.nodes[n].is_leaf() {
                tree.check_table_capacity(id, tree.table_entries(id))?;
            }
        }
        tree.bootstrapped = true;
        Ok(tree)
    }

    fn activate_with(&mut self, leaf: LogicalId, blocks: Vec<(CidrBlock, u64)>, objects: BTreeMap<u32, u32>) {
        let n = &mut self.nodes[leaf.0];
        n.state = NodeState::Busy;
        n.total = blocks.iter().map(|b| b.1).sum();
        n.blocks = blocks;
        n.objects = objects;
    }

    /// Ancestors of `n` from its parent up to the root.
    pub(crate) fn ancestors(&self, n: LogicalId) -> Vec<LogicalId> {
        let mut out = Vec::new();
        let mut cur = self.nodes[n.0].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p.0].parent;
        }
        out
    }

    /// Routes `[lo, hi)` towards `leaf` in every ancestor below `stop` (exclusive).
    pub(crate) fn assign_path(&mut self, leaf: LogicalId, lo: u64, hi: u64, stop: Option<LogicalId>) {
        let mut child = leaf;
        for a in self.ancestors(leaf) {
            if Some(a) == stop {
                break;
            }
            assign(&mut self.nodes[a.0].routes, lo, hi, child);
            self.nodes[a.0].state = NodeState::Busy;
            child = a;
        }
    }

    /// Descends from the root by partition values to the owning busy leaf.
    pub fn owner_of(&self, id: MetaDataId) -> Result<LogicalId, OverlayError> {
        if !self.bootstrapped {
            return Err(OverlayError::NotBootstrapped);
        }
        let mut cur = self.root;
        while !self.nodes[cur.0].is_leaf() {
            cur = route_lookup(&self.nodes[cur.0].routes, id.0).expect("routes tile the space");
        }
        Ok(cur)
    }

    /// Stores one object; splits the owning leaf when it exceeds capacity.
    ///
    /// The object stays stored even if the resulting split fails.
    pub fn insert_object(&mut self, id: MetaDataId) -> Result<InsertOutcome, OverlayError> {
        let leaf = self.owner_of(id)?;
        let over = {
            let n = &mut self.nodes[leaf.0];
            let i = n.blocks.partition_point(|(b, _)| b.end() <= u64::from(id.0));
            n.blocks[i].1 += 1;
            *n.objects.entry(id.0).or_insert(0) += 1;
            n.total += 1;
            n.total > self.cfg.leaf_capacity
        };
        if !over {
            return Ok(InsertOutcome { leaf, split: None });
        }
        let outcome = self.split_leaf(leaf)?;
        let owner = self.owner_of(id)?;
        Ok(InsertOutcome { leaf: owner, split: Some(outcome) })
    }

    /// Removes one copy of an object (count decrement only; blocks never merge).
    pub fn delete_object(&mut self, id: MetaDataId) -> Result<(), OverlayError> {
        let leaf = self.owner_of(id)?;
        let n = &mut self.nodes[leaf.0];
        match n.objects.get_mut(&id.0) {
            Some(c) => {
                *c -= 1;
                if *c == 0 {
                    n.objects.remove(&id.0);
                }
            }
            None => return Err(OverlayError::NotFound(id)),
        }
        let i = n.blocks.partition_point(|(b, _)| b.end() <= u64::from(id.0));
        n.blocks[i].1 -= 1;
        n.total -= 1;
        Ok(())
    }

    /// Number of flow entries each physical member of `node` holds.
    pub(crate) fn table_entries(&self, node: LogicalId) -> usize {
        routes_entries(&self.nodes[node.0].routes)
    }

    pub(crate) fn check_table_capacity(&self, node: LogicalId, entries: usize) -> Result<(), OverlayError> {
        if entries > self.cfg.table_capacity {
            return Err(OverlayError::TableCapacityExceeded {
                switch: self.name_of(node),
                entries,
                capacity: self.cfg.table_capacity,
            });
        }
        Ok(())
    }

    fn switch_tables_of_path(&self, leaf: LogicalId) -> Vec<FlowTableDelta> {
        let mut out = Vec::new();
        for a in self.ancestors(leaf) {
            for &sw in &self.nodes[a.0].physical {
                let table = self.flow_table_for(sw).expect("tree switch");
                out.push(FlowTableDelta { switch: sw, added: table.entries, removed: Vec::new() });
            }
        }
        out
    }

    pub(crate) fn log(&mut self, op: &str, node: LogicalId, target: Option<LogicalId>, deltas: Vec<FlowTableDelta>) {
        let deltas = deltas
            .iter()
            .map(|d| DeltaRecord {
                switch: self.topo.node(d.switch).name.clone(),
                added: d.added.iter().map(|e| e.render(&self.topo)).collect(),
                removed: d.removed.iter().map(|e| e.render(&self.topo)).collect(),
            })
            .collect();
        let event = ControllerEvent {
            seq: self.events.len() as u64,
            op: op.to_string(),
            node: self.name_of(node),
            target: target.map(|t| self.name_of(t)),
            deltas,
        };
        self.events.push(event);
    }
}

pub(crate) fn route_lookup(routes: &BTreeMap<u32, Route>, id: u32) -> Option<LogicalId> {
    let (_, r) = routes.range(..=id).next_back()?;
    (u64::from(id) < r.end).then_some(r.child)
}

pub(crate) fn routes_entries(routes: &BTreeMap<u32, Route>) -> usize {
    routes.iter().map(|(&s, r)| cover_len(u64::from(s), r.end)).sum()
}

/// Routes `[lo, hi)` to `child`, merging with adjacent intervals of the same child.
/// The range must currently be unrouted.
pub(crate) fn assign(routes: &mut BTreeMap<u32, Route>, lo: u64, hi: u64, child: LogicalId) {
    debug_assert!(lo < hi);
    let mut start = lo;
    let mut end = hi;
    if let Some((&ps, pr)) = routes.range(..lo as u32).next_back() {
        debug_assert!(pr.end <= lo, "overlapping assignment");
        if pr.end == lo && pr.child == child {
            start = u64::from(ps);
            routes.remove(&ps);
        }
    }
    if hi < SPACE {
        if let Some(nr) = routes.get(&(hi as u32)).copied() {
            if nr.child == child {
                end = nr.end;
                routes.remove(&(hi as u32));
            }
        }
    }
    routes.insert(start as u32, Route { end, child });
}

/// Unroutes `[lo, hi)`, trimming or splitting any overlapping interval.
pub(crate) fn unassign(routes: &mut BTreeMap<u32, Route>, lo: u64, hi: u64) {
    let mut keep = Vec::new();
    let first = routes.range(..=lo as u32).next_back().map(|(&s, _)| s).unwrap_or(lo as u32);
    let hit: Vec<u32> = routes
        .range(first..)
        .take_while(|(&s, _)| u64::from(s) < hi)
        .filter(|(_, r)| r.end > lo)
        .map(|(&s, _)| s)
        .collect();
    for s in hit {
        let r = routes.remove(&s).expect("present");
        if u64::from(s) < lo {
            keep.push((u64::from(s), lo, r.child));
        }
        if r.end > hi {
            keep.push((hi, r.end, r.child));
        }
    }
    for (s, e, c) in keep {
        routes.insert(s as u32, Route { end: e, child: c });
    }
}

/// Minimal CIDR cover of a leaf range with exact object counts per block.
pub(crate) fn counted_cover(objects: &BTreeMap<u32, u32>, lo: u64, hi: u64) -> Vec<(CidrBlock, u64)> {
    cover_span(lo, hi).into_iter().map(|b| (b, count_in(objects, b))).collect()
}

pub(crate) fn count_in(objects: &BTreeMap<u32, u32>, b: CidrBlock) -> u64 {
    let hi = (b.end() - 1) as u32;
    objects.range(b.prefix()..=hi).map(|(_, &c)| u64::from(c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_fat_tree, build_tier_tree};

    fn tree(t: &Topology) -> OverlayTree {
        map_topology(t, OverlayConfig::default()).unwrap()
    }

    #[test]
    fn fat_tree_mapping_collapses_groups() {
        let t = build_fat_tree(4, 2, 4).unwrap();
        let o = tree(&t);
        assert_eq!(o.node(o.root()).physical.len(), 4);
        let pods: Vec<_> = o.node(o.root()).children.clone();
        assert_eq!(pods.len(), 2);
        for p in pods {
            assert_eq!(o.node(p).physical.len(), 2);
            assert_eq!(o.node(p).children.len(), 2);
        }
        assert_eq!(o.leaves().count(), 8);
        assert_eq!(o.depth(), 4);
        assert!(o.nodes().iter().all(|n| n.state == NodeState::Idle));
    }

    #[test]
    fn tier_tree_depths() {
        let o = tree(&build_tier_tree(2, 2, 2, 3).unwrap());
        assert_eq!(o.depth(), 4);
        assert_eq!(o.leaves().count(), 8);
        let o = tree(&build_tier_tree(4, 1, 4, 2).unwrap());
        assert_eq!(o.depth(), 3);
        assert_eq!(o.node(o.root()).children.len(), 4);
    }

    #[test]
    fn bootstrap_single_owner() {
        let t = build_tier_tree(2, 2, 2, 3).unwrap();
        let mut o = tree(&t);
        o.bootstrap().unwrap();
        let l0 = o.leaf_by_name("server0").unwrap();
        assert_eq!(o.node(l0).blocks(), &[(CidrBlock::full(), 0)]);
        assert_eq!(o.owner_of(MetaDataId(0x9b45_922b)).unwrap(), l0);
        assert_eq!(o.insert_object(MetaDataId(7)).unwrap().leaf, l0);
        assert_eq!(o.bootstrap(), Err(OverlayError::AlreadyBootstrapped));
    }

    #[test]
    fn capacity_one_forces_split() {
        let t = build_tier_tree(2, 2, 2, 3).unwrap();
        let cfg = OverlayConfig { leaf_capacity: 1, ..Default::default() };
        let mut o = map_topology(&t, cfg).unwrap();
        o.bootstrap().unwrap();
        let a = o.insert_object(MetaDataId(10)).unwrap();
        let b = o.insert_object(MetaDataId(0xf000_0000)).unwrap();
        assert!(b.split.is_some());
        assert_ne!(a.leaf, b.leaf);
    }

    #[test]
    fn interval_assign_merges_and_unassign_splits() {
        let mut r = BTreeMap::new();
        assign(&mut r, 0, 100, LogicalId(1));
        assign(&mut r, 100, 200, LogicalId(1));
        assert_eq!(r.len(), 1);
        assign(&mut r, 300, 400, LogicalId(2));
        assign(&mut r, 200, 300, LogicalId(2));
        assert_eq!(r.len(), 2);
        assert_eq!(r[&200].end, 400);
        unassign(&mut r, 50, 250);
        let got: Vec<_> = r.iter().map(|(&s, x)| (s, x.end, x.child.0)).collect();
        assert_eq!(got, vec![(0, 50, 1), (250, 400, 2)]);
        assert_eq!(route_lookup(&r, 49), Some(LogicalId(1)));
        assert_eq!(route_lookup(&r, 50), None);
        assert_eq!(route_lookup(&r, 399), Some(LogicalId(2)));
    }

    #[test]
    fn delete_is_count_decrement() {
        let t = build_tier_tree(1, 1, 2, 2).unwrap();
        let mut o = tree(&t);
        o.bootstrap().unwrap();
        o.insert_object(MetaDataId(5)).unwrap();
        o.delete_object(MetaDataId(5)).unwrap();
        assert_eq!(o.delete_object(MetaDataId(5)), Err(OverlayError::NotFound(MetaDataId(5))));
        let l = o.owner_of(MetaDataId(5)).unwrap();
        assert_eq!(o.node(l).object_count(), 0);
    }
}
