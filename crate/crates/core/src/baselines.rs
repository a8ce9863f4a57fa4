//! Reference lookup services: a Chord ring, a One-Hop directory, client-side
//! hash-mod placement, and a central coordinator.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::id::MetaDataId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("a ring needs at least one node")]
    EmptyRing,
    #[error("server count must be >= 1")]
    NoServers,
    #[error("identifier width {0} outside 1..=32")]
    BadWidth(u32),
    #[error("node index {0} out of range")]
    BadNode(usize),
    #[error("coordinator is down")]
    CoordinatorDown,
}

/// Ring identifier of a node name: the first four bytes of its SHA-256.
///
/// FNV-1a is fine for paths but clusters badly on names such as
/// `server0..server199`, leaving one node with a fifth of the ring.
pub fn ring_position(name: &str) -> u32 {
    let d = Sha256::digest(name.as_bytes());
    u32::from_be_bytes([d[0], d[1], d[2], d[3]])
}

/// Static Chord ring over an identifier space of `2^bits`.
#[derive(Clone, Debug)]
pub struct ChordRing {
    bits: u32,
    nodes: Vec<u32>,
    /// `fingers[n][i]` is the index of successor(nodes[n] + 2^i).
    fingers: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChordLookup {
    /// Index of the owning node.
    pub owner: usize,
    /// Nodes contacted after the start node, up to the owner's predecessor.
    pub hops: Vec<usize>,
}

impl ChordRing {
    /// Builds a full-width ring; duplicate identifiers collapse into one node.
    pub fn new(ids: impl IntoIterator<Item = u32>) -> Result<Self, BaselineError> {
        Self::with_bits(ids, 32)
    }

    /// Places each named node at [`ring_position`] of its name.
    pub fn from_names<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self, BaselineError> {
        Self::new(names.into_iter().map(|n| ring_position(n.as_ref())))
    }

    /// Ring over `[0, 2^bits)`; identifiers are reduced modulo the space.
    pub fn with_bits(ids: impl IntoIterator<Item = u32>, bits: u32) -> Result<Self, BaselineError> {
        if !(1..=32).contains(&bits) {
            return Err(BaselineError::BadWidth(bits));
        }
        let space = 1u64 << bits;
        let mut nodes: Vec<u32> = ids.into_iter().map(|i| (u64::from(i) % space) as u32).collect();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(BaselineError::EmptyRing);
        }
        let mut ring = ChordRing { bits, nodes, fingers: Vec::new() };
        ring.fingers = (0..ring.nodes.len())
            .map(|n| {
                (0..bits)
                    .map(|i| {
                        let target = (u64::from(ring.nodes[n]) + (1u64 << i)) % space;
                        ring.successor_index(target as u32) as u32
                    })
                    .collect()
            })
            .collect();
        Ok(ring)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn node_ids(&self) -> &[u32] {
        &self.nodes
    }

    pub fn fingers(&self, node: usize) -> &[u32] {
        &self.fingers[node]
    }

    /// Index of the first node at or after `id`, wrapping around.
    pub fn successor_index(&self, id: u32) -> usize {
        let i = self.nodes.partition_point(|&n| n < id);
        if i == self.nodes.len() {
            0
        } else {
            i
        }
    }

    /// `x` in the ring interval `(a, b]`; the whole ring when `a == b`.
    fn in_half_open(&self, x: u32, a: u32, b: u32) -> bool {
        if a < b {
            x > a && x <= b
        } else {
            x > a || x <= b
        }
    }

    /// `x` in the open ring interval `(a, b)`.
    fn in_open(&self, x: u32, a: u32, b: u32) -> bool {
        if a < b {
            x > a && x < b
        } else if a > b {
            x > a || x < b
        } else {
            x != a
        }
    }

    /// Greedy finger routing from `start`. A start node that owns the
    /// identifier answers locally with zero hops.
    pub fn lookup(&self, start: usize, id: MetaDataId) -> Result<ChordLookup, BaselineError> {
        let mut hops = Vec::new();
        let owner = self.lookup_with(start, id, |h| hops.push(h))?;
        Ok(ChordLookup { owner, hops })
    }

    /// [`lookup`](Self::lookup) without collecting: `hop` sees each
    /// forwarding node in order. Returns the owner.
    pub fn lookup_with(&self, start: usize, id: MetaDataId, mut hop: impl FnMut(usize)) -> Result<usize, BaselineError> {
        if start >= self.nodes.len() {
            return Err(BaselineError::BadNode(start));
        }
        let id = (u64::from(id.0) % (1u64 << self.bits)) as u32;
        let owner = self.successor_index(id);
        if owner == start {
            return Ok(owner);
        }
        let mut n = start;
        loop {
            let succ = self.fingers[n][0] as usize;
            if self.in_half_open(id, self.nodes[n], self.nodes[succ]) {
                debug_assert_eq!(succ, owner);
                return Ok(succ);
            }
            let next = self.closest_preceding(n, id);
            if next == n {
                return Ok(succ);
            }
            hop(next);
            n = next;
        }
    }

    fn closest_preceding(&self, n: usize, id: u32) -> usize {
        for &f in self.fingers[n].iter().rev() {
            if self.in_open(self.nodes[f as usize], self.nodes[n], id) {
                return f as usize;
            }
        }
        n
    }
}

/// Every node holds the full membership, so any lookup takes at most one hop.
#[derive(Clone, Debug)]
pub struct OneHopDirectory {
    ring: Vec<u32>,
}

impl OneHopDirectory {
    pub fn new(ids: impl IntoIterator<Item = u32>) -> Result<Self, BaselineError> {
        let mut ring: Vec<u32> = ids.into_iter().collect();
        ring.sort_unstable();
        ring.dedup();
        if ring.is_empty() {
            return Err(BaselineError::EmptyRing);
        }
        Ok(OneHopDirectory { ring })
    }

    pub fn from_ring(ring: &ChordRing) -> Self {
        OneHopDirectory { ring: ring.node_ids().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn owner(&self, id: MetaDataId) -> usize {
        let i = self.ring.partition_point(|&n| n < id.0);
        if i == self.ring.len() {
            0
        } else {
            i
        }
    }

    /// `(owner, hops)`: zero hops when the start node owns the identifier.
    pub fn lookup(&self, start: usize, id: MetaDataId) -> Result<(usize, u32), BaselineError> {
        if start >= self.ring.len() {
            return Err(BaselineError::BadNode(start));
        }
        let owner = self.owner(id);
        Ok((owner, u32::from(owner != start)))
    }
}

/// Client-side placement: `id mod server_count`.
pub fn hash_mod_lookup(id: MetaDataId, server_count: usize) -> Result<usize, BaselineError> {
    if server_count == 0 {
        return Err(BaselineError::NoServers);
    }
    Ok((u64::from(id.0) % server_count as u64) as usize)
}

/// A single directory server that maps identifiers to storage servers by
/// equal-width ranges.
#[derive(Clone, Debug)]
pub struct CentralCoordinator {
    servers: usize,
    failed: bool,
}

impl CentralCoordinator {
    pub fn new(servers: usize) -> Result<Self, BaselineError> {
        if servers == 0 {
            return Err(BaselineError::NoServers);
        }
        Ok(CentralCoordinator { servers, failed: false })
    }

    pub fn fail(&mut self) {
        self.failed = true;
    }

    pub fn recover(&mut self) {
        self.failed = false;
    }

    pub fn lookup(&self, id: MetaDataId) -> Result<usize, BaselineError> {
        if self.failed {
            return Err(BaselineError::CoordinatorDown);
        }
        Ok(((u64::from(id.0) * self.servers as u64) >> 32) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_ring_has_no_hops() {
        let r = ChordRing::new([12345]).unwrap();
        for id in [0, 12345, u32::MAX] {
            let l = r.lookup(0, MetaDataId(id)).unwrap();
            assert_eq!(l.owner, 0);
            assert!(l.hops.is_empty());
        }
    }

    #[test]
    fn fingers_are_successors() {
        let r = ChordRing::with_bits([1, 5, 9, 13], 4).unwrap();
        // node 1: 2->5, 3->5, 5->5, 9->9
        assert_eq!(r.fingers(0), &[1, 1, 1, 2]);
        // node 13: 14->1 (wrap), 15->1, 1->1, 5->5
        assert_eq!(r.fingers(3), &[0, 0, 0, 1]);
    }

    #[test]
    fn hash_mod_examples() {
        assert_eq!(hash_mod_lookup(MetaDataId(99), 1).unwrap(), 0);
        assert_eq!(hash_mod_lookup(MetaDataId(u32::MAX), 7).unwrap(), (u32::MAX % 7) as usize);
        assert_eq!(hash_mod_lookup(MetaDataId(1), 0), Err(BaselineError::NoServers));
    }

    #[test]
    fn coordinator_failure() {
        let mut c = CentralCoordinator::new(10).unwrap();
        assert_eq!(c.lookup(MetaDataId(u32::MAX)).unwrap(), 9);
        c.fail();
        assert_eq!(c.lookup(MetaDataId(1)), Err(BaselineError::CoordinatorDown));
    }

    #[test]
    fn onehop_hops() {
        let d = OneHopDirectory::new([100, 200, 300]).unwrap();
        assert_eq!(d.lookup(1, MetaDataId(150)).unwrap(), (1, 0));
        assert_eq!(d.lookup(0, MetaDataId(150)).unwrap(), (1, 1));
        assert_eq!(d.lookup(0, MetaDataId(301)).unwrap(), (0, 0));
    }
}
