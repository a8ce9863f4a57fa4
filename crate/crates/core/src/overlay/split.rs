//! Leaf splitting: choosing the partition value and moving the upper part of
//! a leaf's range to an idle leaf.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::id::{cover_span, split_block, CidrBlock, MetaDataId};

use super::{
    assign, count_in, counted_cover, routes_entries, unassign, FlowEntry, FlowTableDelta, LogicalId, NodeState,
    OverlayError, OverlayTree,
};

/// Result of running the threshold walk over a leaf's blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPlan {
    pub left: Vec<(CidrBlock, u64)>,
    pub right: Vec<(CidrBlock, u64)>,
    /// Number of blocks halved during the walk.
    pub iterations: u32,
}

impl SplitPlan {
    pub fn left_count(&self) -> u64 {
        self.left.iter().map(|b| b.1).sum()
    }

    pub fn right_count(&self) -> u64 {
        self.right.iter().map(|b| b.1).sum()
    }

    pub fn partition_value(&self) -> MetaDataId {
        MetaDataId(self.right[0].0.prefix())
    }
}

/// Walks `blocks` in order, adding them to the left set until it holds more
/// than `lo` of the objects. If it then holds more than `hi`, the last block is
/// taken back, halved, and the walk resumes on its lower half.
///
/// A `/32` block cannot be halved; the cut then goes just before or just after
/// it, whichever lands closer to half, as long as both sides keep objects.
/// `Err` carries the identifier of a block no cut can get around.
pub fn plan_split(
    blocks: &[(CidrBlock, u64)],
    objects: &BTreeMap<u32, u32>,
    lo: f64,
    hi: f64,
) -> Result<SplitPlan, MetaDataId> {
    let total: u64 = blocks.iter().map(|b| b.1).sum();
    let t = total as f64;
    let mut pending: VecDeque<(CidrBlock, u64)> = blocks.iter().copied().collect();
    let mut left = Vec::new();
    let mut acc = 0u64;
    let mut iterations = 0;
    while let Some((b, c)) = pending.pop_front() {
        if (acc + c) as f64 <= lo * t {
            left.push((b, c));
            acc += c;
            continue;
        }
        if (acc + c) as f64 <= hi * t {
            left.push((b, c));
            break;
        }
        match split_block(b) {
            Ok((low, high)) => {
                let lc = count_in(objects, low);
                pending.push_front((high, c - lc));
                pending.push_front((low, lc));
                iterations += 1;
            }
            Err(_) => {
                let before = acc;
                let after = acc + c;
                let half = t / 2.0;
                let before_ok = before > 0;
                let after_ok = after < total;
                let take = match (before_ok, after_ok) {
                    (true, true) => (after as f64 - half).abs() < (half - before as f64).abs(),
                    (true, false) => false,
                    (false, true) => true,
                    (false, false) => return Err(MetaDataId(b.prefix())),
                };
                if take {
                    left.push((b, c));
                } else {
                    pending.push_front((b, c));
                }
                break;
            }
        }
    }
    let right: Vec<_> = pending.into_iter().collect();
    if left.is_empty() || right.is_empty() {
        let at = blocks.first().map(|b| b.0.prefix()).unwrap_or(0);
        return Err(MetaDataId(at));
    }
    Ok(SplitPlan { left, right, iterations })
}

#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub leaf: LogicalId,
    pub new_leaf: LogicalId,
    pub partition_value: MetaDataId,
    /// Blocks now held by the new leaf (minimal cover of the moved range).
    pub moved_blocks: Vec<CidrBlock>,
    pub retained_blocks: Vec<CidrBlock>,
    pub left_count: u64,
    pub right_count: u64,
    pub iterations: u32,
    /// The new leaf is not a sibling of the split leaf.
    pub escalated: bool,
    pub flow_table_deltas: Vec<FlowTableDelta>,
}

impl SplitOutcome {
    pub fn left_fraction(&self) -> f64 {
        self.left_count as f64 / (self.left_count + self.right_count) as f64
    }
}

impl OverlayTree {
    /// Splits a busy leaf, moving the upper part of its range to an idle leaf.
    pub fn split_leaf(&mut self, leaf: LogicalId) -> Result<SplitOutcome, OverlayError> {
        let node = &self.nodes[leaf.0];
        if !node.is_leaf() {
            return Err(OverlayError::NotALeaf(self.name_of(leaf)));
        }
        if node.state != NodeState::Busy {
            return Err(OverlayError::NotBusy(self.name_of(leaf)));
        }
        let (start, end) = node.range().expect("busy leaf owns a range");
        let plan = plan_split(&node.blocks, &node.objects, self.cfg.split_lo, self.cfg.split_hi)
            .map_err(|id| OverlayError::UnsplittableHotspot { leaf: self.name_of(leaf), id })?;
        let m = u64::from(plan.partition_value().0);
        let (lca, target) = self.find_target(leaf, m, end)?;

        // Plan every route change, check table capacity, then commit.
        let left_path: Vec<LogicalId> = self.ancestors(leaf).into_iter().take_while(|&a| a != lca).collect();
        let right_chain: Vec<LogicalId> = {
            let mut chain = vec![target];
            chain.extend(self.ancestors(target).into_iter().take_while(|&a| a != lca));
            chain
        };
        let mut changes = Vec::new();
        let mut lca_routes = self.nodes[lca.0].routes.clone();
        unassign(&mut lca_routes, m, end);
        assign(&mut lca_routes, m, end, *right_chain.last().expect("non-empty"));
        changes.push((lca, lca_routes));
        for &a in &left_path {
            let mut r = self.nodes[a.0].routes.clone();
            unassign(&mut r, m, end);
            changes.push((a, r));
        }
        for w in right_chain.windows(2) {
            let (child, a) = (w[0], w[1]);
            let mut r = self.nodes[a.0].routes.clone();
            assign(&mut r, m, end, child);
            changes.push((a, r));
        }
        for (a, r) in &changes {
            self.check_table_capacity(*a, routes_entries(r))?;
        }

        let mut deltas = Vec::new();
        for (a, r) in changes {
            deltas.extend(self.route_deltas(a, &self.nodes[a.0].routes, &r));
            let n = &mut self.nodes[a.0];
            n.routes = r;
            n.state = if n.routes.is_empty() { NodeState::Idle } else { NodeState::Busy };
        }

        let moved_objects = self.nodes[leaf.0].objects.split_off(&(m as u32));
        let left_blocks = counted_cover(&self.nodes[leaf.0].objects, start, m);
        let right_blocks = counted_cover(&moved_objects, m, end);
        let left_count: u64 = left_blocks.iter().map(|b| b.1).sum();
        let right_count: u64 = right_blocks.iter().map(|b| b.1).sum();
        {
            let n = &mut self.nodes[leaf.0];
            n.blocks = left_blocks;
            n.total = left_count;
        }
        let outcome = SplitOutcome {
            leaf,
            new_leaf: target,
            partition_value: MetaDataId(m as u32),
            moved_blocks: right_blocks.iter().map(|b| b.0).collect(),
            retained_blocks: self.nodes[leaf.0].blocks.iter().map(|b| b.0).collect(),
            left_count,
            right_count,
            iterations: plan.iterations,
            escalated: lca != self.nodes[leaf.0].parent.expect("leaf has parent"),
            flow_table_deltas: deltas.clone(),
        };
        self.activate_with(target, right_blocks, moved_objects);
        self.log("split", leaf, Some(target), deltas);
        Ok(outcome)
    }

    /// Picks the idle leaf that receives the moved range `[m, e)`, and the
    /// lowest common ancestor whose routes change.
    ///
    /// Idle siblings come first (lowest physical id). Otherwise, unless in
    /// strict mode, each ancestor in turn looks for another child subtree with
    /// an idle leaf, preferring the one whose routed ranges lie closest to
    /// `[m, e)` in key order, then the nearest by position. The same rule picks
    /// the path down inside that subtree.
    fn find_target(&self, leaf: LogicalId, m: u64, e: u64) -> Result<(LogicalId, LogicalId), OverlayError> {
        let parent = self.nodes[leaf.0].parent.expect("leaf has parent");
        if let Some(s) = self.lowest_idle_child(parent) {
            return Ok((parent, s));
        }
        if !self.cfg.strict {
            let mut below = parent;
            let mut cur = self.nodes[parent.0].parent;
            while let Some(a) = cur {
                if let Some(k) = self.closest_idle_child(a, Some(below), m, e) {
                    return Ok((a, self.descend_to_idle(k, m, e)));
                }
                below = a;
                cur = self.nodes[a.0].parent;
            }
        }
        Err(OverlayError::CapacityExhausted(self.name_of(leaf)))
    }

    fn lowest_idle_child(&self, parent: LogicalId) -> Option<LogicalId> {
        self.nodes[parent.0]
            .children
            .iter()
            .map(|&c| &self.nodes[c.0])
            .filter(|n| n.idle_candidate())
            .min_by_key(|n| n.physical[0])
            .map(|n| n.id)
    }

    fn closest_idle_child(&self, a: LogicalId, skip: Option<LogicalId>, m: u64, e: u64) -> Option<LogicalId> {
        let kids = &self.nodes[a.0].children;
        let idx = skip.and_then(|s| kids.iter().position(|&k| k == s)).unwrap_or(0);
        let mut gap: std::collections::HashMap<LogicalId, u64> = std::collections::HashMap::new();
        for (&start, r) in &self.nodes[a.0].routes {
            let start = u64::from(start);
            let d = if start >= e {
                start - e
            } else if r.end <= m {
                m - r.end
            } else {
                0
            };
            let g = gap.entry(r.child).or_insert(u64::MAX);
            *g = (*g).min(d);
        }
        kids.iter()
            .enumerate()
            .filter(|&(_, &k)| Some(k) != skip && self.has_idle_leaf(k))
            .min_by_key(|&(j, &k)| (gap.get(&k).copied().unwrap_or(u64::MAX), j.abs_diff(idx), j))
            .map(|(_, &k)| k)
    }

    fn descend_to_idle(&self, mut node: LogicalId, m: u64, e: u64) -> LogicalId {
        loop {
            if let Some(leaf) = self.lowest_idle_child(node) {
                return leaf;
            }
            node = self.closest_idle_child(node, None, m, e).expect("subtree has an idle leaf");
        }
    }

    fn has_idle_leaf(&self, subtree: LogicalId) -> bool {
        let mut stack = vec![subtree];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n.0];
            if node.idle_candidate() {
                return true;
            }
            stack.extend(node.children.iter().copied());
        }
        false
    }

    /// Entry changes on every switch backing `node` when its routes change
    /// from `before` to `after`.
    pub(crate) fn route_deltas(
        &self,
        node: LogicalId,
        before: &BTreeMap<u32, super::Route>,
        after: &BTreeMap<u32, super::Route>,
    ) -> Vec<FlowTableDelta> {
        let gone: Vec<(u64, u64, LogicalId)> = before
            .iter()
            .filter(|(s, r)| after.get(s) != Some(r))
            .map(|(&s, r)| (u64::from(s), r.end, r.child))
            .collect();
        let new: Vec<(u64, u64, LogicalId)> = after
            .iter()
            .filter(|(s, r)| before.get(s) != Some(r))
            .map(|(&s, r)| (u64::from(s), r.end, r.child))
            .collect();
        let mut out = Vec::new();
        for &sw in &self.nodes[node.0].physical {
            let entries = |spans: &[(u64, u64, LogicalId)]| -> Vec<FlowEntry> {
                spans
                    .iter()
                    .flat_map(|&(s, e, child)| {
                        let action = self.action_towards(sw, child);
                        cover_span(s, e).into_iter().map(move |prefix| FlowEntry {
                            prefix,
                            port: self.cfg.port,
                            action: action.clone(),
                        })
                    })
                    .collect()
            };
            let removed_all = entries(&gone);
            let added_all = entries(&new);
            let old: HashSet<&FlowEntry> = removed_all.iter().collect();
            let fresh: HashSet<&FlowEntry> = added_all.iter().collect();
            let removed: Vec<FlowEntry> = removed_all.iter().filter(|e| !fresh.contains(e)).cloned().collect();
            let added: Vec<FlowEntry> = added_all.iter().filter(|e| !old.contains(e)).cloned().collect();
            if !added.is_empty() || !removed.is_empty() {
                out.push(FlowTableDelta { switch: sw, added, removed });
            }
        }
        out
    }
}
