//! The event loop. Servers are FIFO CPU queues; operations walk their visit
//! plans; simulated time is integer nanoseconds and ties break on insertion
//! order.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::workload::{Component, Stage, Visit, Workload};

/// How measurement proceeds once a population is in place.
#[derive(Clone, Debug)]
pub struct Measure {
    /// Completions (of closed-loop operations) ignored before measuring.
    pub warmup_ops: u64,
    /// Completions (of closed-loop operations) per measurement window.
    pub measure_ops: u64,
    /// Windows are repeated until the latest agrees within `settle`
    /// (relative) with both the previous one and the one halfway back, or
    /// this many have run; the last one is reported.
    pub max_windows: usize,
    pub settle: f64,
}

impl Measure {
    /// A single window.
    pub fn once(warmup_ops: u64, measure_ops: u64) -> Self {
        Measure { warmup_ops, measure_ops, max_windows: 1, settle: 0.0 }
    }
}

/// What one simulation run does.
#[derive(Clone, Debug)]
pub struct RunSpec {
    /// Closed-loop clients, each issuing its next operation as soon as the
    /// previous one completes.
    pub clients: usize,
    /// Poisson arrivals of open-loop background operations, per second.
    pub open_rate: f64,
    pub measure: Measure,
}

impl RunSpec {
    pub fn once(clients: usize, warmup_ops: u64, measure_ops: u64) -> Self {
        RunSpec { clients, open_rate: 0.0, measure: Measure::once(warmup_ops, measure_ops) }
    }
}

/// Latency sums of measured operations, ns. `components` is indexed by
/// [`Component::index`] with network time last.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatencyStats {
    pub count: u64,
    pub total: u128,
    pub components: [u128; 4],
    pub samples: Vec<u64>,
}

pub const NETWORK: usize = 3;

impl LatencyStats {
    pub fn mean_ns(&self) -> f64 {
        self.total as f64 / self.count.max(1) as f64
    }

    pub fn component_mean_ns(&self, i: usize) -> f64 {
        self.components[i] as f64 / self.count.max(1) as f64
    }

    /// Nearest-rank percentile.
    pub fn percentile_ns(&self, p: f64) -> u64 {
        if self.samples.is_empty() {
            return 0;
        }
        let mut s = self.samples.clone();
        s.sort_unstable();
        let rank = ((p * s.len() as f64).ceil() as usize).clamp(1, s.len());
        s[rank - 1]
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Measurement windows run, including the reported one.
    pub windows: usize,
    pub window_ns: u64,
    /// Measured closed-loop completions per second.
    pub throughput: f64,
    pub latency: LatencyStats,
    /// Busy ns per resource inside the window, by component.
    pub busy: Vec<[u64; 3]>,
    pub hops: BTreeMap<u32, u64>,
}

impl RunResult {
    pub fn mean_hops(&self) -> f64 {
        let (n, sum) = self.hops.iter().fold((0u64, 0u64), |(n, s), (&h, &c)| (n + c, s + u64::from(h) * c));
        sum as f64 / n.max(1) as f64
    }

    /// `[storage, lookup, nat, idle]` shares of one resource's window.
    pub fn utilization(&self, resource: usize) -> [f64; 4] {
        let w = self.window_ns.max(1) as f64;
        let b = self.busy[resource];
        let io = b[Component::Io.index()] as f64 / w;
        let lookup = b[Component::Lookup.index()] as f64 / w;
        let nat = b[Component::Nat.index()] as f64 / w;
        [io, lookup, nat, (1.0 - io - lookup - nat).max(0.0)]
    }
}

struct Op {
    client: Option<u32>,
    visits: Vec<Visit>,
    next: usize,
    start: u64,
    parts: [u64; 4],
    hops: u32,
}

/// Every scheduled CPU slice that has not ended yet, per resource.
struct CpuLedger {
    free_at: Vec<u64>,
    pending: Vec<VecDeque<(u64, u64, usize)>>,
    busy: Vec<[u64; 3]>,
    window_start: Option<u64>,
}

impl CpuLedger {
    fn new(n: usize) -> Self {
        CpuLedger {
            free_at: vec![0; n],
            pending: vec![VecDeque::new(); n],
            busy: vec![[0; 3]; n],
            window_start: None,
        }
    }

    /// Queues `v` at its resource on arrival at `t`; returns the start time.
    fn schedule(&mut self, r: usize, t: u64, (first, second): (Stage, Option<Stage>)) -> u64 {
        let start = t.max(self.free_at[r]);
        let q = &mut self.pending[r];
        while q.front().is_some_and(|&(_, end, _)| end <= t) {
            q.pop_front();
        }
        let mut at = start;
        for s in std::iter::once(first).chain(second) {
            if s.cpu_ns == 0 {
                continue;
            }
            let end = at + s.cpu_ns;
            q.push_back((at, end, s.component.index()));
            if let Some(ws) = self.window_start {
                self.busy[r][s.component.index()] += end.saturating_sub(at.max(ws));
            }
            at = end;
        }
        self.free_at[r] = at;
        start
    }

    fn open_window(&mut self, ws: u64) {
        self.window_start = Some(ws);
        self.busy.iter_mut().for_each(|b| *b = [0; 3]);
        for (r, q) in self.pending.iter().enumerate() {
            for &(s, e, c) in q {
                self.busy[r][c] += e.saturating_sub(s.max(ws));
            }
        }
    }

    /// Drops whatever lies beyond `we` from the busy totals.
    fn close_window(&mut self, we: u64) {
        for (r, q) in self.pending.iter().enumerate() {
            for &(s, e, c) in q {
                let ws = self.window_start.unwrap_or(0);
                let counted = e.saturating_sub(s.max(ws));
                let inside = we.min(e).saturating_sub(s.max(ws));
                self.busy[r][c] -= counted - inside;
            }
        }
    }
}

const STEP: u128 = 0;
const ARRIVAL: u128 = 1;
const OP_BITS: u32 = 27;

const SEQ_BITS: u32 = 36;

/// Event key: time, then insertion order, then the payload. Distinct for
/// every event, and never below the key last popped.
fn key(t: u64, seq: u64, kind: u128, op: u32) -> u128 {
    assert!(seq < 1 << SEQ_BITS && op < 1 << OP_BITS, "event counter overflow");
    (u128::from(t) << 64) | (u128::from(seq) << (OP_BITS + 1)) | (kind << OP_BITS) | u128::from(op)
}

/// Monotone radix heap: every key pushed is at least the last key popped,
/// which holds for event times. Keys sit in buckets by the highest bit in
/// which they differ from the last popped key; only the lowest non-empty
/// bucket is ever sorted out, so pushes are O(1) and pops amortised O(bits).
struct EventQueue {
    last: u128,
    len: usize,
    /// Bit `i` set when bucket `i` is non-empty.
    occupied: u128,
    buckets: Vec<Vec<u128>>,
}

impl EventQueue {
    fn new() -> Self {
        EventQueue { last: 0, len: 0, occupied: 0, buckets: vec![Vec::new(); 128] }
    }

    /// Times stay below 2^63 ns, so keys never differ in the top bit.
    fn bucket(&self, k: u128) -> usize {
        (128 - (k ^ self.last).leading_zeros()).min(127) as usize
    }

    fn push(&mut self, k: u128) {
        debug_assert!(k >= self.last && k >> 127 == 0);
        let b = self.bucket(k);
        self.buckets[b].push(k);
        self.occupied |= 1 << b;
        self.len += 1;
    }

    fn pop(&mut self) -> Option<u128> {
        if self.len == 0 {
            return None;
        }
        if self.occupied & 1 == 0 {
            let i = self.occupied.trailing_zeros() as usize;
            let mut spill = std::mem::take(&mut self.buckets[i]);
            self.occupied &= !(1 << i);
            self.last = *spill.iter().min().expect("occupied bucket");
            for &k in &spill {
                let b = self.bucket(k);
                self.buckets[b].push(k);
                self.occupied |= 1 << b;
            }
            spill.clear();
            self.buckets[i] = spill;
        }
        self.len -= 1;
        let k = self.buckets[0].pop();
        if self.buckets[0].is_empty() {
            self.occupied &= !1;
        }
        k
    }
}

fn unkey(k: u128) -> (u64, u128, u32) {
    let op = (k & ((1 << OP_BITS) - 1)) as u32;
    ((k >> 64) as u64, (k >> OP_BITS) & 1, op)
}

/// A running simulation. Clients can be added between measurements, so a
/// saturation search continues from the previous population's steady state
/// instead of starting over.
pub struct Sim<'w> {
    w: &'w Workload,
    rng: ChaCha8Rng,
    heap: EventQueue,
    seq: u64,
    ops: Vec<Op>,
    free: Vec<u32>,
    ledger: CpuLedger,
    now: u64,
    open_rate: f64,
    clients: usize,
}

impl<'w> Sim<'w> {
    pub fn new(w: &'w Workload, open_rate: f64, rng: ChaCha8Rng) -> Self {
        let mut sim = Sim {
            w,
            rng,
            heap: EventQueue::new(),
            seq: 0,
            ops: Vec::new(),
            free: Vec::new(),
            ledger: CpuLedger::new(w.resources().len()),
            now: 0,
            open_rate,
            clients: 0,
        };
        if open_rate > 0.0 {
            let first = sim.gap();
            sim.push(first, ARRIVAL, 0);
        }
        sim
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    /// Starts `n` more closed-loop clients at the current time.
    pub fn add_clients(&mut self, n: usize) {
        for _ in 0..n {
            let c = self.clients as u32;
            self.clients += 1;
            let (idx, at) = self.begin(Some(c), self.now);
            self.push(at, STEP, idx);
        }
    }

    fn push(&mut self, t: u64, kind: u128, op: u32) {
        self.heap.push(key(t, self.seq, kind, op));
        self.seq += 1;
    }

    fn gap(&mut self) -> u64 {
        let u: f64 = self.rng.gen_range(f64::EPSILON..1.0);
        (-u.ln() / self.open_rate * 1e9).round() as u64
    }

    fn begin(&mut self, client: Option<u32>, t: u64) -> (u32, u64) {
        let idx = match self.free.pop() {
            Some(i) => i,
            None => {
                self.ops.push(Op { client: None, visits: Vec::new(), next: 0, start: 0, parts: [0; 4], hops: 0 });
                (self.ops.len() - 1) as u32
            }
        };
        let op = &mut self.ops[idx as usize];
        op.hops = self.w.plan(&mut self.rng, &mut op.visits);
        op.client = client;
        op.next = 0;
        op.start = t;
        op.parts = [0; 4];
        let net = u64::from(op.visits[0].net_ns);
        op.parts[NETWORK] += net;
        (idx, t + net)
    }

    /// Runs until the measurement windows settle; see [`Measure`].
    /// Open-loop operations load the servers but are not measured.
    pub fn measure(&mut self, m: &Measure) -> RunResult {
        assert!(self.clients >= 1, "measurement needs at least one closed-loop client");
        let mut done = 0u64;
        let mut ws = self.now;
        let mut in_window = 0u64;
        let mut windows = 0usize;
        let mut history: Vec<f64> = Vec::new();
        let mut latency = LatencyStats::default();
        let mut hops = BTreeMap::new();
        if m.warmup_ops == 0 {
            self.ledger.open_window(self.now);
            windows = 1;
        }
        while let Some(k) = self.heap.pop() {
            let (t, kind, idx) = unkey(k);
            self.now = t;
            if kind == ARRIVAL {
                let (op, at) = self.begin(None, t);
                self.push(at, STEP, op);
                let next = t + self.gap();
                self.push(next, ARRIVAL, 0);
                continue;
            }
            let op = &mut self.ops[idx as usize];
            if op.next < op.visits.len() {
                let v = op.visits[op.next];
                let (a, b) = self.w.stages(v.kind);
                let start = self.ledger.schedule(v.resource as usize, t, (a, b));
                let first = a.service_ns();
                op.parts[a.component.index()] += start - t + first;
                let mut end = start + first;
                if let Some(s) = b {
                    op.parts[s.component.index()] += s.service_ns();
                    end += s.service_ns();
                }
                op.next += 1;
                if let Some(n) = op.visits.get(op.next) {
                    op.parts[NETWORK] += u64::from(n.net_ns);
                    end += u64::from(n.net_ns);
                }
                self.push(end, STEP, idx);
                continue;
            }
            // Completed.
            let Some(client) = op.client else {
                self.free.push(idx);
                continue;
            };
            done += 1;
            let mut stop = false;
            if windows > 0 {
                let lat = t - op.start;
                latency.count += 1;
                latency.total += u128::from(lat);
                for (acc, &p) in latency.components.iter_mut().zip(&op.parts) {
                    *acc += u128::from(p);
                }
                latency.samples.push(lat);
                *hops.entry(op.hops).or_insert(0) += 1;
                in_window += 1;
                if in_window == m.measure_ops {
                    let thr = in_window as f64 / ((t - ws).max(1) as f64 / 1e9);
                    // Flat against the previous window and against the window
                    // halfway back: a slow drift or a temporary plateau passes
                    // the first test but not both.
                    history.push(thr);
                    let k = history.len();
                    let near = |i: usize| (thr - history[i]).abs() <= m.settle * history[i];
                    stop = (k >= 3 && near(k - 2) && near((k - 1) / 2)) || windows >= m.max_windows;
                    if !stop {
                        windows += 1;
                        in_window = 0;
                        ws = t;
                        latency = LatencyStats::default();
                        hops.clear();
                        self.ledger.open_window(t);
                    }
                }
            } else if done == m.warmup_ops {
                windows = 1;
                ws = t;
                self.ledger.open_window(t);
            }
            self.free.push(idx);
            let (next, at) = self.begin(Some(client), t);
            self.push(at, STEP, next);
            if stop {
                break;
            }
        }
        self.ledger.close_window(self.now);
        let window_ns = self.now - ws;
        RunResult {
            windows,
            window_ns,
            throughput: in_window as f64 / (window_ns.max(1) as f64 / 1e9),
            latency,
            busy: self.ledger.busy.clone(),
            hops,
        }
    }
}

/// A fresh simulation of `spec.clients` clients, measured once.
pub fn simulate(w: &Workload, spec: &RunSpec, rng: ChaCha8Rng) -> RunResult {
    let mut sim = Sim::new(w, spec.open_rate, rng);
    sim.add_clients(spec.clients);
    sim.measure(&spec.measure)
}

#[cfg(test)]
mod tests {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    use proptest::prelude::*;

    use super::*;

    proptest! {
        /// Interleaved pushes (never below the last pop) and pops come out
        /// in the same order as from a binary heap.
        #[test]
        fn radix_heap_matches_binary_heap(script in prop::collection::vec((0u64..5_000, 0u8..3), 1..400)) {
            let mut q = EventQueue::new();
            let mut reference = BinaryHeap::new();
            let mut now = 0u64;
            for (seq, (dt, pops)) in script.into_iter().enumerate() {
                let k = key(now + dt, seq as u64, STEP, seq as u32);
                q.push(k);
                reference.push(Reverse(k));
                for _ in 0..pops {
                    let got = q.pop();
                    prop_assert_eq!(got, reference.pop().map(|r| r.0));
                    if let Some(k) = got {
                        now = unkey(k).0;
                    }
                }
            }
            while let Some(Reverse(k)) = reference.pop() {
                prop_assert_eq!(q.pop(), Some(k));
            }
            prop_assert_eq!(q.pop(), None);
        }
    }

    #[test]
    fn key_round_trip() {
        let k = key(123_456_789, 77, ARRIVAL, 5);
        assert_eq!(unkey(k), (123_456_789, ARRIVAL, 5));
        assert!(key(1, 0, STEP, 9) < key(1, 1, STEP, 0));
        assert!(key(1, 9, STEP, 9) < key(2, 0, STEP, 0));
    }
}
