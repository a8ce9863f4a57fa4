//! Cost model, storage profiles, the closed-form throughput oracle and the
//! single-scalar calibration of the lookup cost.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, Service};
use crate::workload::Workload;
use crate::SimError;

/// CPU units of one lookup RPC before calibration. Storage I/O costs are
/// expressed relative to it through the profile's throughput ratio.
pub const BASE_LOOKUP_COST: f64 = 20.0;
/// Service latency of one lookup exchange, seconds.
pub const BASE_LOOKUP_LATENCY: f64 = 20e-6;
/// Share of server CPU the NAT agent takes at Redis saturation.
pub const NAT_CPU_SHARE: f64 = 0.15;
/// NAT rewrite latency as a fraction of an unloaded hash-mod operation on
/// the default tree (one 5-link round trip at 1 us plus one 20 us I/O).
pub const NAT_LATENCY_FRACTION: f64 = 0.4;
pub const DEFAULT_CAPACITY: f64 = 1e6;
pub const DEFAULT_LINK_LATENCY: f64 = 1e-6;
/// 10 Gbit/s in bytes per second.
pub const DEFAULT_LINK_BANDWIDTH: f64 = 1.25e9;
/// Chord reduction at 200 Redis servers that calibration pins.
pub const DEFAULT_TARGET_REDUCTION: f64 = 0.70;
pub const CALIBRATION_SERVERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Redis,
    LeveldbSsd,
    LeveldbHdd,
    Mysql,
}

impl Profile {
    pub const ALL: [Profile; 4] = [Profile::Redis, Profile::LeveldbSsd, Profile::LeveldbHdd, Profile::Mysql];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Redis => "redis",
            Profile::LeveldbSsd => "leveldb-ssd",
            Profile::LeveldbHdd => "leveldb-hdd",
            Profile::Mysql => "mysql",
        }
    }

    /// Lookup-subsystem throughput divided by storage throughput.
    pub fn throughput_ratio(self) -> f64 {
        match self {
            Profile::Redis => 1.0,
            Profile::LeveldbSsd => 1.5,
            Profile::LeveldbHdd => 2.0,
            Profile::Mysql => 100.0,
        }
    }

    /// Lookup-subsystem latency divided by storage latency.
    pub fn latency_ratio(self) -> f64 {
        match self {
            Profile::Redis => 1.0,
            Profile::LeveldbSsd => 0.7,
            Profile::LeveldbHdd => 0.5,
            Profile::Mysql => 0.001,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown profile `{s}`")))
    }
}

/// CPU costs are in abstract units; a server retires `server_capacity` units
/// per second. Latencies are seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub io_cost: f64,
    pub lookup_hop_cost: f64,
    pub nat_cost: f64,
    pub link_latency: f64,
    pub io_latency: f64,
    pub lookup_latency: f64,
    pub nat_latency: f64,
    pub server_capacity: f64,
    /// Bytes per second on every link.
    pub link_bandwidth: f64,
}

impl CostModel {
    pub fn for_profile(p: Profile) -> Self {
        let redis_io = BASE_LOOKUP_COST * Profile::Redis.throughput_ratio();
        let base_op = 2.0 * 5.0 * DEFAULT_LINK_LATENCY + BASE_LOOKUP_LATENCY / Profile::Redis.latency_ratio();
        CostModel {
            io_cost: BASE_LOOKUP_COST * p.throughput_ratio(),
            lookup_hop_cost: BASE_LOOKUP_COST,
            nat_cost: redis_io * NAT_CPU_SHARE / (1.0 - NAT_CPU_SHARE),
            link_latency: DEFAULT_LINK_LATENCY,
            io_latency: BASE_LOOKUP_LATENCY / p.latency_ratio(),
            lookup_latency: BASE_LOOKUP_LATENCY,
            nat_latency: NAT_LATENCY_FRACTION * base_op,
            server_capacity: DEFAULT_CAPACITY,
            link_bandwidth: DEFAULT_LINK_BANDWIDTH,
        }
    }

    pub fn check(&self) -> Result<(), SimError> {
        let fields = [
            ("io_cost", self.io_cost),
            ("lookup_hop_cost", self.lookup_hop_cost),
            ("nat_cost", self.nat_cost),
            ("link_latency", self.link_latency),
            ("io_latency", self.io_latency),
            ("lookup_latency", self.lookup_latency),
            ("nat_latency", self.nat_latency),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.server_capacity > 0.0 && self.server_capacity.is_finite()) {
            return Err(SimError::Config(format!("server_capacity must be > 0, got {}", self.server_capacity)));
        }
        if !(self.link_bandwidth > 0.0) {
            return Err(SimError::Config(format!("link_bandwidth must be > 0, got {}", self.link_bandwidth)));
        }
        Ok(())
    }

    /// CPU time of `units` on one server, in nanoseconds.
    pub fn cpu_ns(&self, units: f64) -> u64 {
        (units / self.server_capacity * 1e9).round() as u64
    }
}

pub fn secs_to_ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

/// Mean lookup RPCs per operation as the oracle counts them: 0 for the
/// services that find the owner without asking a server, 1 for One-Hop and
/// the coordinator, and the sampled mean of the workload for Chord.
pub fn mean_lookup_rpcs(cfg: &ScenarioConfig) -> Result<f64, SimError> {
    Ok(match cfg.service {
        Service::Metaflow | Service::Hashmod | Service::Ideal => 0.0,
        Service::Onehop | Service::Central => 1.0,
        Service::Chord => {
            let w = Workload::build(cfg)?;
            w.sample_mean_hops(cfg.seed()?, ORACLE_SAMPLES)
        }
    })
}

const ORACLE_SAMPLES: u64 = 100_000;

/// Closed-form saturation throughput, ops/s:
/// `M*C / (io + h*lookup + nat*[metaflow])`. The coordinator is a server of
/// its own, so the central service is also capped at `C / lookup`.
pub fn throughput_oracle(cfg: &ScenarioConfig) -> Result<f64, SimError> {
    let m = cfg.cost_model()?;
    let servers = cfg.build_topology()?.active_servers().count() as f64;
    let h = mean_lookup_rpcs(cfg)?;
    Ok(oracle_formula(cfg.service, &m, servers, h))
}

pub fn oracle_formula(service: Service, m: &CostModel, servers: f64, h: f64) -> f64 {
    let nat = if service == Service::Metaflow { m.nat_cost } else { 0.0 };
    match service {
        Service::Central => {
            let storage = servers * m.server_capacity / m.io_cost;
            let coordinator = m.server_capacity / m.lookup_hop_cost;
            storage.min(coordinator)
        }
        _ => servers * m.server_capacity / (m.io_cost + h * m.lookup_hop_cost + nat),
    }
}

/// Throughput reduction of `service` relative to zero-lookup placement.
pub fn reduction(throughput: f64, ideal: f64) -> f64 {
    1.0 - throughput / ideal
}

/// Solves for the lookup cost that makes the oracle's Chord reduction at
/// 200 servers equal `target`, using the configured topology and profile.
/// The result is the profile's model with that lookup cost frozen in.
pub fn calibrate(cfg: &ScenarioConfig, target: f64) -> Result<CostModel, SimError> {
    if !(0.0 < target && target < 1.0) {
        return Err(SimError::Infeasible(format!("target reduction {target} outside (0, 1)")));
    }
    let mut chord = cfg.clone();
    chord.service = Service::Chord;
    chord.topology.active_servers = Some(CALIBRATION_SERVERS);
    let h = mean_lookup_rpcs(&chord)?;
    if h <= 0.0 {
        return Err(SimError::Infeasible("chord lookups take no hops on this ring".into()));
    }
    let mut m = chord.cost_model()?;
    m.lookup_hop_cost = m.io_cost * (1.0 / (1.0 - target) - 1.0) / h;
    Ok(m)
}
