//! Flow tables derived from the logical tree.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::id::{cover_span, CidrBlock};
use crate::topology::{Layer, NodeId, Topology};

use super::{routes_entries, LogicalId, OverlayError, OverlayTree};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Forward(NodeId),
    /// Several physical switches back the next logical node; the packet goes
    /// to one of them chosen by a hash of its addresses.
    ForwardGroup(Vec<NodeId>),
}

impl Action {
    pub fn targets(&self) -> &[NodeId] {
        match self {
            Action::Forward(n) => std::slice::from_ref(n),
            Action::ForwardGroup(g) => g,
        }
    }

    fn render(&self, topo: &Topology) -> String {
        let names: Vec<&str> = self.targets().iter().map(|&n| topo.node(n).name.as_str()).collect();
        names.join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FlowEntry {
    pub prefix: CidrBlock,
    pub port: u16,
    pub action: Action,
}

impl FlowEntry {
    /// `<prefix>/<len> <port> FORWARD <target>`
    pub fn render(&self, topo: &Topology) -> String {
        format!("{} {} FORWARD {}", self.prefix, self.port, self.action.render(topo))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowTable {
    pub switch: NodeId,
    /// Sorted by `(prefix, length)`.
    pub entries: Vec<FlowEntry>,
}

impl FlowTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One line per entry, newline terminated.
pub fn render_table(table: &FlowTable, topo: &Topology) -> String {
    let mut out = String::new();
    for e in &table.entries {
        writeln!(out, "{}", e.render(topo)).expect("write to string");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowTableDelta {
    pub switch: NodeId,
    pub added: Vec<FlowEntry>,
    pub removed: Vec<FlowEntry>,
}

impl OverlayTree {
    /// The flow table of a physical switch in the current tree state.
    pub fn flow_table_for(&self, switch: NodeId) -> Result<FlowTable, OverlayError> {
        let Some(node) = self.topo.nodes().get(switch.0).filter(|n| n.is_switch()) else {
            return Err(OverlayError::UnknownSwitch(format!("{switch}")));
        };
        if node.layer == Some(Layer::Application) {
            let action = self.action_towards(switch, self.root);
            let entries = vec![FlowEntry { prefix: CidrBlock::full(), port: self.cfg.port, action }];
            return Ok(FlowTable { switch, entries });
        }
        let logical = self.logical_of(switch).ok_or_else(|| OverlayError::UnknownSwitch(node.name.clone()))?;
        let mut actions: HashMap<LogicalId, Action> = HashMap::new();
        let mut entries = Vec::with_capacity(routes_entries(&self.nodes[logical.0].routes));
        for (&start, r) in &self.nodes[logical.0].routes {
            let action = actions.entry(r.child).or_insert_with(|| self.action_towards(switch, r.child)).clone();
            for prefix in cover_span(u64::from(start), r.end) {
                entries.push(FlowEntry { prefix, port: self.cfg.port, action: action.clone() });
            }
        }
        Ok(FlowTable { switch, entries })
    }

    pub fn flow_table_by_name(&self, name: &str) -> Result<FlowTable, OverlayError> {
        let id = self.topo.find(name).ok_or_else(|| OverlayError::UnknownSwitch(name.to_string()))?;
        self.flow_table_for(id)
    }

    /// Number of entries `switch` holds, without materializing the table.
    pub fn table_size(&self, switch: NodeId) -> usize {
        let node = self.topo.node(switch);
        if node.layer == Some(Layer::Application) {
            return 1;
        }
        self.logical_of(switch).map(|l| routes_entries(&self.nodes[l.0].routes)).unwrap_or(0)
    }

    /// Tables of every switch, in node order.
    pub fn all_flow_tables(&self) -> Vec<FlowTable> {
        self.topo
            .nodes()
            .iter()
            .filter(|n| n.is_switch())
            .map(|n| self.flow_table_for(n.id).expect("switch"))
            .collect()
    }

    pub(crate) fn action_towards(&self, switch: NodeId, child: LogicalId) -> Action {
        let neighbors = self.topo.neighbors(switch);
        let targets: Vec<NodeId> =
            self.nodes[child.0].physical.iter().copied().filter(|p| neighbors.contains(p)).collect();
        match targets.as_slice() {
            [one] => Action::Forward(*one),
            _ => Action::ForwardGroup(targets),
        }
    }
}
