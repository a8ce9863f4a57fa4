//! Packet-level model of the request path: the application switch's port
//! rule, longest-prefix matching down the storage tree, and the NAT agent on
//! each storage server.

use std::collections::HashMap;

use thiserror::Error;

use crate::id::{fnv1a32, CidrBlock, MetaDataId};
use crate::overlay::{Action, FlowTable, OverlayTree};
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataplaneError {
    #[error("table miss at {switch} for {dst}")]
    RoutingFailure { switch: String, dst: MetaDataId },
    #[error("topology has no application switch")]
    NoEntrySwitch,
    #[error("forwarding loop after {0} hops")]
    Loop(usize),
    #[error("NAT binding table full ({0} bindings)")]
    BindingTableFull(usize),
    #[error("no NAT binding for {client}:{port}")]
    NoBinding { client: String, port: u16 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketKind {
    MetaFlowRequest,
    MetaFlowResponse,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packet {
    pub src_addr: u32,
    pub src_port: u16,
    /// The MetaDataId for requests.
    pub dst_addr: u32,
    pub dst_port: u16,
    pub kind: PacketKind,
    pub payload_size: u32,
}

impl Packet {
    pub fn request(client: u32, client_port: u16, id: MetaDataId, port: u16, payload_size: u32) -> Self {
        Packet {
            src_addr: client,
            src_port: client_port,
            dst_addr: id.0,
            dst_port: port,
            kind: PacketKind::MetaFlowRequest,
            payload_size,
        }
    }
}

/// Longest-prefix match by scanning every entry; the reference semantics.
pub fn lpm_match(table: &FlowTable, dst: u32, port: u16) -> Option<&Action> {
    let mut best: Option<&crate::overlay::FlowEntry> = None;
    for e in table.entries.iter().filter(|e| e.port == port && e.prefix.contains(MetaDataId(dst))) {
        match best {
            Some(b) => {
                assert_ne!(b.prefix.len(), e.prefix.len(), "two matching entries of equal length");
                if e.prefix.len() > b.prefix.len() {
                    best = Some(e);
                }
            }
            None => best = Some(e),
        }
    }
    best.map(|e| &e.action)
}

/// Hash-indexed table: one map per prefix length, probed longest first.
#[derive(Clone, Debug, Default)]
pub struct LpmTable {
    levels: Vec<(u8, HashMap<(u16, u32), Action>)>,
}

impl LpmTable {
    pub fn new(table: &FlowTable) -> Self {
        let mut by_len: HashMap<u8, HashMap<(u16, u32), Action>> = HashMap::new();
        for e in &table.entries {
            by_len.entry(e.prefix.len()).or_default().insert((e.port, e.prefix.prefix()), e.action.clone());
        }
        let mut levels: Vec<_> = by_len.into_iter().collect();
        levels.sort_by(|a, b| b.0.cmp(&a.0));
        LpmTable { levels }
    }

    pub fn lookup(&self, dst: u32, port: u16) -> Option<&Action> {
        self.levels.iter().find_map(|(len, map)| {
            let key = CidrBlock::host(dst).prefix() & prefix_mask(*len);
            map.get(&(port, key))
        })
    }
}

fn prefix_mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len))
    }
}

/// A snapshot of every switch's table, indexed for forwarding.
#[derive(Clone, Debug)]
pub struct SwitchTables {
    tables: HashMap<NodeId, LpmTable>,
    port: u16,
}

impl SwitchTables {
    pub fn from_tree(tree: &OverlayTree) -> Self {
        let tables = tree.all_flow_tables().iter().map(|t| (t.switch, LpmTable::new(t))).collect();
        SwitchTables { tables, port: tree.config().port }
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn get(&self, switch: NodeId) -> Option<&LpmTable> {
        self.tables.get(&switch)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutedPath {
    /// Switches traversed, starting at the application switch.
    pub hops: Vec<NodeId>,
    pub server: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Delivery {
    MetaFlow(RoutedPath),
    /// Not a MetaFlow packet; relayed by ordinary forwarding.
    Normal,
}

/// Forwards a request from the application switch down to its storage server.
pub fn route_request(pkt: &Packet, topo: &Topology, tables: &SwitchTables) -> Result<Delivery, DataplaneError> {
    if pkt.kind != PacketKind::MetaFlowRequest || pkt.dst_port != tables.port {
        return Ok(Delivery::Normal);
    }
    let mut at = topo.application_switch().ok_or(DataplaneError::NoEntrySwitch)?;
    let mut hops = Vec::new();
    let limit = topo.nodes().len();
    loop {
        hops.push(at);
        if hops.len() > limit {
            return Err(DataplaneError::Loop(hops.len()));
        }
        let action = tables.get(at).and_then(|t| t.lookup(pkt.dst_addr, pkt.dst_port)).ok_or_else(|| {
            DataplaneError::RoutingFailure { switch: topo.node(at).name.clone(), dst: MetaDataId(pkt.dst_addr) }
        })?;
        let next = pick_target(action, pkt);
        if topo.node(next).is_server() {
            return Ok(Delivery::MetaFlow(RoutedPath { hops, server: next }));
        }
        at = next;
    }
}

/// Chooses among equivalent next hops by a hash of (src, dst).
fn pick_target(action: &Action, pkt: &Packet) -> NodeId {
    let targets = action.targets();
    if targets.len() == 1 {
        return targets[0];
    }
    let mut key = [0u8; 8];
    key[..4].copy_from_slice(&pkt.src_addr.to_be_bytes());
    key[4..].copy_from_slice(&pkt.dst_addr.to_be_bytes());
    targets[fnv1a32(&key) as usize % targets.len()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NatBinding {
    pub original_dst: MetaDataId,
    pub server_physical: u32,
    pub client: u32,
    pub client_port: u16,
}

/// Per-server address translation between MetaDataIds and the server's
/// physical address, one binding per client connection.
#[derive(Clone, Debug)]
pub struct NatAgent {
    server_addr: u32,
    capacity: usize,
    bindings: HashMap<(u32, u16), NatBinding>,
}

impl NatAgent {
    pub fn new(server_addr: u32, capacity: usize) -> Self {
        NatAgent { server_addr, capacity, bindings: HashMap::new() }
    }

    pub fn active_bindings(&self) -> usize {
        self.bindings.len()
    }

    /// Rewrites the request's destination to this server and records the binding.
    pub fn nat_inbound(&mut self, pkt: &Packet) -> Result<(Packet, NatBinding), DataplaneError> {
        let key = (pkt.src_addr, pkt.src_port);
        if !self.bindings.contains_key(&key) && self.bindings.len() >= self.capacity {
            return Err(DataplaneError::BindingTableFull(self.capacity));
        }
        let binding = NatBinding {
            original_dst: MetaDataId(pkt.dst_addr),
            server_physical: self.server_addr,
            client: pkt.src_addr,
            client_port: pkt.src_port,
        };
        self.bindings.insert(key, binding);
        Ok((Packet { dst_addr: self.server_addr, ..*pkt }, binding))
    }

    /// Rewrites the response's source back to the MetaDataId the client asked for.
    pub fn nat_outbound(&self, response: &Packet) -> Result<Packet, DataplaneError> {
        let b = self.bindings.get(&(response.dst_addr, response.dst_port)).ok_or_else(|| no_binding(response))?;
        Ok(Packet { src_addr: b.original_dst.0, ..*response })
    }

    /// Retires the binding of a finished connection.
    pub fn close_connection(&mut self, client: u32, client_port: u16) -> Result<NatBinding, DataplaneError> {
        self.bindings.remove(&(client, client_port)).ok_or_else(|| DataplaneError::NoBinding {
            client: std::net::Ipv4Addr::from(client).to_string(),
            port: client_port,
        })
    }
}

fn no_binding(p: &Packet) -> DataplaneError {
    DataplaneError::NoBinding { client: std::net::Ipv4Addr::from(p.dst_addr).to_string(), port: p.dst_port }
}

/// The server's reply to a translated request.
pub fn echo_response(request: &Packet, payload_size: u32) -> Packet {
    Packet {
        src_addr: request.dst_addr,
        src_port: request.dst_port,
        dst_addr: request.src_addr,
        dst_port: request.src_port,
        kind: PacketKind::MetaFlowResponse,
        payload_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overlay::FlowEntry;

    fn table(rows: &[(&str, usize)]) -> FlowTable {
        FlowTable {
            switch: NodeId(0),
            entries: rows
                .iter()
                .map(|(p, t)| FlowEntry { prefix: p.parse().unwrap(), port: 9000, action: Action::Forward(NodeId(*t)) })
                .collect(),
        }
    }

    fn ip(s: &str) -> u32 {
        u32::from(s.parse::<std::net::Ipv4Addr>().unwrap())
    }

    #[test]
    fn listing_lookups() {
        let t = table(&[("0.0.0.0/2", 1), ("64.0.0.0/3", 1), ("96.0.0.0/3", 2)]);
        let idx = LpmTable::new(&t);
        assert_eq!(lpm_match(&t, ip("70.0.0.1"), 9000), Some(&Action::Forward(NodeId(1))));
        assert_eq!(idx.lookup(ip("70.0.0.1"), 9000), Some(&Action::Forward(NodeId(1))));
        assert_eq!(lpm_match(&t, ip("200.0.0.1"), 9000), None);
        assert_eq!(idx.lookup(ip("200.0.0.1"), 9000), None);
        assert_eq!(idx.lookup(ip("70.0.0.1"), 80), None);
    }

    #[test]
    fn longer_prefix_wins() {
        let t = table(&[("0.0.0.0/1", 1), ("64.0.0.0/4", 2)]);
        assert_eq!(lpm_match(&t, ip("64.0.0.5"), 9000), Some(&Action::Forward(NodeId(2))));
        assert_eq!(LpmTable::new(&t).lookup(ip("64.0.0.5"), 9000), Some(&Action::Forward(NodeId(2))));
    }

    #[test]
    fn nat_example() {
        let server = ip("192.168.0.1");
        let id: MetaDataId = "155.69.146.43".parse().unwrap();
        let mut nat = NatAgent::new(server, 4);
        let req = Packet::request(ip("10.0.0.7"), 40000, id, 9000, 64);
        let (inside, b) = nat.nat_inbound(&req).unwrap();
        assert_eq!(inside.dst_addr, server);
        assert_eq!(b.original_dst, id);
        let resp = nat.nat_outbound(&echo_response(&inside, 290)).unwrap();
        assert_eq!(resp.src_addr, id.0);
        nat.close_connection(req.src_addr, req.src_port).unwrap();
        assert!(matches!(nat.nat_outbound(&echo_response(&inside, 290)), Err(DataplaneError::NoBinding { .. })));
    }

    #[test]
    fn nat_two_clients_and_cap() {
        let id = MetaDataId(5);
        let mut nat = NatAgent::new(1, 2);
        nat.nat_inbound(&Packet::request(10, 1, id, 9000, 0)).unwrap();
        nat.nat_inbound(&Packet::request(11, 1, id, 9000, 0)).unwrap();
        assert_eq!(nat.active_bindings(), 2);
        assert_eq!(
            nat.nat_inbound(&Packet::request(12, 1, id, 9000, 0)).unwrap_err(),
            DataplaneError::BindingTableFull(2)
        );
    }
}
