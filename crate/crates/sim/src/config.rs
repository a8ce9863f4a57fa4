//! Scenario configuration, read from TOML.

use std::fmt;
use std::str::FromStr;

use metaflow_core::overlay::OverlayConfig;
use metaflow_core::topology::{Topology, TopologyKind, TopologySpec};
use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, Profile};
use crate::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Service {
    Metaflow,
    Chord,
    Onehop,
    Hashmod,
    Central,
    Ideal,
}

impl Service {
    pub const ALL: [Service; 6] =
        [Service::Metaflow, Service::Chord, Service::Onehop, Service::Hashmod, Service::Central, Service::Ideal];

    pub fn as_str(self) -> &'static str {
        match self {
            Service::Metaflow => "metaflow",
            Service::Chord => "chord",
            Service::Onehop => "onehop",
            Service::Hashmod => "hashmod",
            Service::Central => "central",
            Service::Ideal => "ideal",
        }
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Service {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Service::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown service `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub get_fraction: f64,
    /// Value bytes carried by a get response.
    pub get_size: u32,
    /// Value bytes carried by a put request.
    pub put_size: u32,
    /// Objects inserted into the overlay before a MetaFlow run; `None` keeps
    /// inserting until every eligible leaf holds data.
    pub preload_objects: Option<u64>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig { get_fraction: 0.20, get_size: 250, put_size: 290, preload_objects: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// First closed-loop population of the saturation search; 0 means
    /// `clients_per_server` times the server count.
    pub clients: usize,
    pub clients_per_server: usize,
    /// Population of the low-load latency run.
    pub latency_clients: usize,
    /// Completions discarded before measuring; 0 means twice the population.
    pub warmup_ops: u64,
    /// Completions per measurement window (at least eight per client).
    pub measure_ops: u64,
    /// Windows repeat until the latest agrees within `settle` with the
    /// previous one and with the one halfway back, up to `max_windows`.
    pub max_windows: usize,
    pub settle: f64,
    pub latency_ops: u64,
    /// Population growth per saturation step.
    pub step: f64,
    /// A step that gains less than this fraction ends the search.
    pub min_gain: f64,
    pub max_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            clients: 0,
            clients_per_server: 128,
            latency_clients: 4,
            warmup_ops: 0,
            measure_ops: 200_000,
            max_windows: 40,
            settle: 0.01,
            latency_ops: 20_000,
            step: 0.10,
            min_gain: 0.01,
            max_steps: 8,
        }
    }
}

/// Overrides on top of the storage profile's cost model. Times are in
/// microseconds here and seconds in [`CostModel`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostOverrides {
    pub server_capacity: Option<f64>,
    pub io_cost: Option<f64>,
    pub io_latency_us: Option<f64>,
    pub lookup_hop_cost: Option<f64>,
    pub lookup_latency_us: Option<f64>,
    pub nat_cost: Option<f64>,
    pub nat_latency_us: Option<f64>,
    pub link_latency_us: Option<f64>,
    pub link_gbps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DfsConfig {
    pub file_size: u64,
    pub total_bytes: u64,
    pub bg_ops_per_s: f64,
    /// Client-to-storage data path, gigabits per second; 0 means unlimited.
    pub data_gbps: f64,
    /// Foreground metadata operations sampled to estimate the per-file latency.
    pub samples: u64,
}

impl Default for DfsConfig {
    fn default() -> Self {
        DfsConfig { file_size: 64 << 10, total_bytes: 100 << 30, bg_ops_per_s: 5e5, data_gbps: 10.0, samples: 5_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Required; every random choice derives from it.
    pub seed: Option<u64>,
    pub service: Service,
    pub profile: Profile,
    pub topology: TopologySpec,
    pub workload: WorkloadConfig,
    pub run: RunConfig,
    pub cost: CostOverrides,
    pub overlay: OverlayConfig,
    pub dfs: DfsConfig,
}

impl Default for ScenarioConfig {
    /// A 200-server three-tier tree: one core, two aggregation switches with
    /// five edge switches each, twenty servers per edge.
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            seed: None,
            service: Service::Metaflow,
            profile: Profile::Redis,
            topology: TopologySpec {
                kind: Some(TopologyKind::ThreeTier),
                core_fanout: Some(2),
                agg_fanout: Some(5),
                edge_fanout: Some(20),
                ..TopologySpec::default()
            },
            workload: WorkloadConfig::default(),
            run: RunConfig::default(),
            cost: CostOverrides::default(),
            overlay: OverlayConfig { leaf_capacity: 1000, ..OverlayConfig::default() },
            dfs: DfsConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg = Self::from_toml_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without [`validate`](Self::validate), so command-line
    /// overrides such as the seed can be applied first.
    pub fn from_toml_unchecked(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64, SimError> {
        self.seed.ok_or_else(|| SimError::Config("`seed` is required".into()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.seed()?;
        let w = &self.workload;
        if !(0.0..=1.0).contains(&w.get_fraction) {
            return Err(SimError::Config(format!("get_fraction {} outside [0, 1]", w.get_fraction)));
        }
        let r = &self.run;
        if r.clients == 0 && r.clients_per_server == 0 {
            return Err(SimError::Config("clients and clients_per_server are both 0".into()));
        }
        if r.latency_clients == 0 || r.measure_ops == 0 || r.latency_ops == 0 || r.max_windows == 0 {
            return Err(SimError::Config(
                "latency_clients, measure_ops, latency_ops and max_windows must be >= 1".into(),
            ));
        }
        if !(r.step > 0.0) || !(r.min_gain >= 0.0) {
            return Err(SimError::Config("step must be > 0 and min_gain >= 0".into()));
        }
        self.overlay.check().map_err(|e| SimError::Config(e.to_string()))?;
        if self.dfs.file_size == 0 || self.dfs.data_gbps < 0.0 || self.dfs.bg_ops_per_s < 0.0 {
            return Err(SimError::Config("dfs needs file_size >= 1 and non-negative rates".into()));
        }
        self.cost_model()?;
        self.build_topology()?;
        Ok(())
    }

    pub fn build_topology(&self) -> Result<Topology, SimError> {
        Ok(self.topology.build()?)
    }

    /// The profile preset with the `[cost]` overrides applied.
    pub fn cost_model(&self) -> Result<CostModel, SimError> {
        let mut m = CostModel::for_profile(self.profile);
        let c = &self.cost;
        let us = |v: f64| v * 1e-6;
        if let Some(v) = c.server_capacity {
            m.server_capacity = v;
        }
        if let Some(v) = c.io_cost {
            m.io_cost = v;
        }
        if let Some(v) = c.io_latency_us {
            m.io_latency = us(v);
        }
        if let Some(v) = c.lookup_hop_cost {
            m.lookup_hop_cost = v;
        }
        if let Some(v) = c.lookup_latency_us {
            m.lookup_latency = us(v);
        }
        if let Some(v) = c.nat_cost {
            m.nat_cost = v;
        }
        if let Some(v) = c.nat_latency_us {
            m.nat_latency = us(v);
        }
        if let Some(v) = c.link_latency_us {
            m.link_latency = us(v);
        }
        if let Some(v) = c.link_gbps {
            m.link_bandwidth = v * 1e9 / 8.0;
        }
        m.check()?;
        Ok(m)
    }

    /// Applies one `key=value` override, as used by sweeps. Keys are dotted
    /// TOML paths (`run.measure_ops`); `servers` is shorthand for
    /// `topology.active_servers`.
    pub fn with_override(&self, key: &str, value: &str) -> Result<ScenarioConfig, SimError> {
        let path = match key {
            "servers" => "topology.active_servers",
            other => other,
        };
        let mut doc: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| SimError::Config(e.message().to_string()))?;
        let parsed = parse_scalar(value);
        let mut parts: Vec<&str> = path.split('.').collect();
        let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| SimError::Config(format!("bad key `{key}`")))?;
        let mut table = &mut doc;
        for p in parts {
            table = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| SimError::Config(format!("`{p}` in `{key}` is not a section")))?;
        }
        table.insert(last.to_string(), parsed);
        let text = toml::to_string(&doc).expect("table serializes");
        ScenarioConfig::from_toml(&text)
    }
}

fn parse_scalar(v: &str) -> toml::Value {
    if let Ok(i) = v.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = v.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match v {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(v.to_string()),
    }
}
