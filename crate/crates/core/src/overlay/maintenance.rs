//! Membership changes: server/switch joins and leaf failures.

use crate::topology::{Layer, TopologyError, TopologyKind};

use super::{FlowTableDelta, LogicalId, NodeState, OverlayError, OverlayTree, Role};

#[derive(Clone, Debug)]
pub struct ReplacementOutcome {
    pub failed: LogicalId,
    /// `None` when the failed leaf was idle.
    pub replacement: Option<LogicalId>,
    pub flow_table_deltas: Vec<FlowTableDelta>,
}

impl OverlayTree {
    /// Attaches a new server under an edge switch as an idle leaf.
    /// Flow tables do not change.
    pub fn handle_join(&mut self, server: &str, edge_switch: &str) -> Result<LogicalId, OverlayError> {
        if self.topo.find(server).is_some() {
            return Err(TopologyError::DuplicateNode(server.to_string()).into());
        }
        let edge = self.topo.find(edge_switch).ok_or_else(|| OverlayError::UnknownNode(edge_switch.to_string()))?;
        let en = self.topo.node(edge);
        if en.layer != Some(Layer::Edge) {
            return Err(OverlayError::InvalidJoin(format!("{edge_switch} is not an edge switch")));
        }
        self.require_free_port(edge)?;
        let pod = en.pod;
        let s = self.topo.add_server(server, pod)?;
        self.topo.link(edge, s);
        let parent = self.by_physical[&edge];
        let leaf = self.push(Role::Leaf, vec![s], Some(parent));
        self.log("join", leaf, None, Vec::new());
        Ok(leaf)
    }

    /// Attaches a new edge switch (with no servers yet) as an idle inner node.
    ///
    /// `parent` is an aggregation switch, or the core switch of a two-tier tree.
    /// In a fat tree the new switch links to every aggregation switch of the pod.
    pub fn handle_join_switch(&mut self, name: &str, parent: &str) -> Result<LogicalId, OverlayError> {
        if self.topo.find(name).is_some() {
            return Err(TopologyError::DuplicateNode(name.to_string()).into());
        }
        let p = self.topo.find(parent).ok_or_else(|| OverlayError::UnknownNode(parent.to_string()))?;
        let expected = match self.topo.kind() {
            TopologyKind::TwoTier => Layer::Core,
            TopologyKind::ThreeTier | TopologyKind::FatTree => Layer::Aggregation,
        };
        let pn = self.topo.node(p);
        if pn.layer != Some(expected) {
            return Err(OverlayError::InvalidJoin(format!("edge switches attach under {expected} switches")));
        }
        let (pod, ports) = (pn.pod, pn.port_count.unwrap_or(2));
        let logical_parent = self.by_physical[&p];
        let members = self.nodes[logical_parent.0].physical.clone();
        for &m in &members {
            self.require_free_port(m)?;
        }
        let sw = self.topo.add_switch(name, Layer::Edge, ports, pod)?;
        for m in members {
            self.topo.link(m, sw);
        }
        let id = self.push(Role::Inner, vec![sw], Some(logical_parent));
        self.log("join", id, None, Vec::new());
        Ok(id)
    }

    fn require_free_port(&self, sw: crate::topology::NodeId) -> Result<(), OverlayError> {
        let n = self.topo.node(sw);
        let used = self.topo.neighbors(sw).len() as u32;
        if used >= n.port_count.unwrap_or(0) {
            return Err(OverlayError::InvalidJoin(format!("{} has no free port", n.name)));
        }
        Ok(())
    }

    /// Replaces a failed busy leaf with an idle sibling that inherits its
    /// blocks; the parent switch's entries are retargeted. Failing an idle
    /// leaf only retires it.
    pub fn handle_failure(&mut self, leaf: LogicalId) -> Result<ReplacementOutcome, OverlayError> {
        if !self.nodes[leaf.0].is_leaf() {
            return Err(OverlayError::NotALeaf(self.name_of(leaf)));
        }
        let state = self.nodes[leaf.0].state;
        if state != NodeState::Busy {
            let n = &mut self.nodes[leaf.0];
            n.state = NodeState::Failed;
            n.eligible = false;
            if state == NodeState::Idle {
                self.log("failure", leaf, None, Vec::new());
            }
            return Ok(ReplacementOutcome { failed: leaf, replacement: None, flow_table_deltas: Vec::new() });
        }
        let parent = self.nodes[leaf.0].parent.expect("leaf has parent");
        let replacement = self.nodes[parent.0]
            .children
            .iter()
            .map(|&c| &self.nodes[c.0])
            .filter(|n| n.idle_candidate())
            .min_by_key(|n| n.physical[0])
            .map(|n| n.id)
            .ok_or_else(|| OverlayError::CapacityExhausted(self.name_of(leaf)))?;

        let mut routes = self.nodes[parent.0].routes.clone();
        for r in routes.values_mut() {
            if r.child == leaf {
                r.child = replacement;
            }
        }
        let deltas = self.route_deltas(parent, &self.nodes[parent.0].routes, &routes);
        self.nodes[parent.0].routes = routes;

        let failed = &mut self.nodes[leaf.0];
        let blocks = std::mem::take(&mut failed.blocks);
        let objects = std::mem::take(&mut failed.objects);
        failed.total = 0;
        failed.state = NodeState::Failed;
        failed.eligible = false;
        self.activate_with(replacement, blocks, objects);
        self.log("failure", leaf, Some(replacement), deltas.clone());
        Ok(ReplacementOutcome { failed: leaf, replacement: Some(replacement), flow_table_deltas: deltas })
    }
}
