#![allow(dead_code)]

use metaflow_core::id::SPACE;
use metaflow_core::overlay::{Action, FlowTable, LogicalId, OverlayTree};
use metaflow_core::topology::NodeId;
use metaflow_core::MetaDataId;

/// Asserts the busy leaves' blocks tile the identifier space exactly once.
pub fn assert_tiles(tree: &OverlayTree) {
    let mut blocks: Vec<(u64, u64)> =
        tree.busy_leaves().flat_map(|l| l.blocks().iter().map(|(b, _)| (b.start(), b.end()))).collect();
    blocks.sort();
    let mut cursor = 0;
    for (s, e) in blocks {
        assert_eq!(s, cursor, "gap or overlap at {s:#x}");
        cursor = e;
    }
    assert_eq!(cursor, SPACE, "space not fully covered");
}

/// Linear-scan LPM, independent of the data plane's indexed tables.
pub fn scan_lpm(table: &FlowTable, dst: u32) -> Option<Action> {
    table
        .entries
        .iter()
        .filter(|e| e.prefix.start() <= u64::from(dst) && u64::from(dst) < e.prefix.end())
        .max_by_key(|e| e.prefix.len())
        .map(|e| e.action.clone())
}

/// Follows flow tables switch by switch from the application switch and
/// returns the server reached. Group actions take member `choice % len`.
pub fn walk_tables(tree: &OverlayTree, tables: &[Option<FlowTable>], id: MetaDataId, choice: usize) -> Option<NodeId> {
    let topo = tree.topology();
    let mut at = topo.application_switch()?;
    for _ in 0..16 {
        let action = scan_lpm(tables[at.0].as_ref()?, id.0)?;
        let targets = action.targets();
        let next = targets[choice % targets.len()];
        if topo.node(next).is_server() {
            return Some(next);
        }
        at = next;
    }
    None
}

/// Every switch's table, indexed by physical node id.
pub fn table_snapshot(tree: &OverlayTree) -> Vec<Option<FlowTable>> {
    let mut out = vec![None; tree.topology().nodes().len()];
    for t in tree.all_flow_tables() {
        let i = t.switch.0;
        out[i] = Some(t);
    }
    out
}

pub fn rendered_tables(tree: &OverlayTree) -> Vec<String> {
    tree.all_flow_tables().iter().map(|t| metaflow_core::overlay::render_table(t, tree.topology())).collect()
}

/// Range `[start, end)` owned by a busy leaf.
pub fn leaf_range(tree: &OverlayTree, leaf: LogicalId) -> (u64, u64) {
    tree.node(leaf).range().expect("busy leaf")
}
