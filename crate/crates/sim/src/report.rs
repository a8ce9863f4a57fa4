//! Scenario runs and their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::census::{flow_table_census, LayerCensus};
use crate::config::ScenarioConfig;
use crate::cost::{mean_lookup_rpcs, oracle_formula, Profile};
use crate::engine::{simulate, Measure, RunResult, RunSpec, Sim, NETWORK};
use crate::workload::{Component, Workload};
use crate::{stream_rng, SimError, Service, STREAM_LATENCY, STREAM_SATURATION};

/// Sampled operations per resource behind the bottleneck estimate.
const BOTTLENECK_SAMPLES_PER_RESOURCE: u64 = 1000;
/// Saturation windows span at least this many completions per client. An
/// unbalanced service needs time for its busiest servers' queues to absorb
/// the population; consecutive windows of this size stop drifting once they
/// have.
const WINDOW_PER_CLIENT: u64 = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServerCpu {
    pub name: String,
    pub storage: f64,
    pub lookup: f64,
    pub nat: f64,
    pub idle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatencySummary {
    pub clients: usize,
    pub ops: u64,
    pub mean_us: f64,
    pub p99_us: f64,
    pub lookup_us: f64,
    pub io_us: f64,
    pub nat_us: f64,
    pub network_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub service: Service,
    pub profile: Profile,
    pub servers: usize,
    pub seed: u64,
    /// Closed-loop population at which the saturation search stopped.
    pub clients: usize,
    pub throughput_ops_s: f64,
    pub oracle_ops_s: f64,
    /// Throughput at which the busiest server saturates, estimated from
    /// sampled per-server demand.
    pub bottleneck_ops_s: f64,
    /// `(clients, ops/s)` of every saturation step.
    pub saturation_steps: Vec<(usize, f64)>,
    pub latency: LatencySummary,
    pub mean_hops: f64,
    pub hop_histogram: BTreeMap<u32, u64>,
    /// Per-resource CPU shares over the last saturation window.
    pub cpu: Vec<ServerCpu>,
    pub tables: Vec<LayerCensus>,
    /// Operations that failed. Membership is static during a run, so only a
    /// failed coordinator could produce any.
    pub errors: u64,
}

/// Saturation search, then a low-load latency run.
///
/// The search starts at `run.clients` (or `clients_per_server` per server)
/// and grows the population by `run.step` until a step gains less than
/// `run.min_gain`. Each step adds clients to the running simulation.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, SimError> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let w = Workload::build(cfg)?;
    let servers = w.servers();
    let h = match cfg.service {
        Service::Chord => w.sample_mean_hops(seed, 100_000),
        _ => mean_lookup_rpcs(cfg)?,
    };
    let oracle = oracle_formula(cfg.service, &w.model, servers as f64, h);
    let bottleneck = w.bottleneck_bound(seed, BOTTLENECK_SAMPLES_PER_RESOURCE * w.resources().len() as u64);

    let r = &cfg.run;
    let first = if r.clients > 0 { r.clients } else { r.clients_per_server * servers };
    let mut sim = Sim::new(&w, 0.0, stream_rng(seed, STREAM_SATURATION));
    let mut steps = Vec::new();
    let mut best: Option<(usize, RunResult)> = None;
    for _ in 0..=r.max_steps {
        let target = if steps.is_empty() { first } else { ((sim.clients() as f64) * (1.0 + r.step)).ceil() as usize };
        sim.add_clients(target - sim.clients());
        let clients = sim.clients();
        let m = Measure {
            warmup_ops: if r.warmup_ops > 0 { r.warmup_ops } else { 2 * clients as u64 },
            measure_ops: r.measure_ops.max(WINDOW_PER_CLIENT * clients as u64),
            max_windows: r.max_windows,
            settle: r.settle,
        };
        let res = sim.measure(&m);
        steps.push((clients, res.throughput));
        let prev = best.as_ref().map(|b| b.1.throughput);
        let gained = prev.map_or(true, |p| res.throughput >= p * (1.0 + r.min_gain));
        if prev.map_or(true, |p| res.throughput > p) {
            best = Some((clients, res));
        }
        if !gained {
            break;
        }
    }
    let (sat_clients, sat) = best.expect("at least one step");

    let (latency, lat) = latency_run(&w, cfg, seed);
    let cpu = w
        .resources()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let [storage, lookup, nat, idle] = sat.utilization(i);
            ServerCpu { name: name.clone(), storage, lookup, nat, idle }
        })
        .collect();
    Ok(MetricsReport {
        scenario: cfg.name.clone(),
        service: cfg.service,
        profile: cfg.profile,
        servers,
        seed,
        clients: sat_clients,
        throughput_ops_s: sat.throughput,
        oracle_ops_s: oracle,
        bottleneck_ops_s: bottleneck,
        saturation_steps: steps,
        latency,
        mean_hops: lat.mean_hops(),
        hop_histogram: lat.hops.clone(),
        cpu,
        tables: w.tree().map(flow_table_census).unwrap_or_default(),
        errors: 0,
    })
}

/// The low-load latency run alone.
pub fn measure_latency(cfg: &ScenarioConfig) -> Result<LatencySummary, SimError> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let w = Workload::build(cfg)?;
    Ok(latency_run(&w, cfg, seed).0)
}

fn latency_run(w: &Workload, cfg: &ScenarioConfig, seed: u64) -> (LatencySummary, RunResult) {
    let r = &cfg.run;
    let low = RunSpec::once(r.latency_clients, 2 * r.latency_clients as u64, r.latency_ops);
    let lat = simulate(w, &low, stream_rng(seed, STREAM_LATENCY));
    let us = |ns: f64| ns / 1e3;
    let l = &lat.latency;
    let summary = LatencySummary {
        clients: r.latency_clients,
        ops: l.count,
        mean_us: us(l.mean_ns()),
        p99_us: us(l.percentile_ns(0.99) as f64),
        lookup_us: us(l.component_mean_ns(Component::Lookup.index())),
        io_us: us(l.component_mean_ns(Component::Io.index())),
        nat_us: us(l.component_mean_ns(Component::Nat.index())),
        network_us: us(l.component_mean_ns(NETWORK)),
    };
    (summary, lat)
}

pub const CSV_HEADER: [&str; 8] = ["scenario", "service", "profile", "servers", "seed", "metric", "subject", "value"];

impl MetricsReport {
    /// `(metric, subject, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, String, String)> {
        let mut rows = Vec::new();
        let mut put = |m: &'static str, subject: &str, v: String| rows.push((m, subject.to_string(), v));
        put("throughput_ops_s", "", fmt(self.throughput_ops_s));
        put("oracle_ops_s", "", fmt(self.oracle_ops_s));
        put("bottleneck_ops_s", "", fmt(self.bottleneck_ops_s));
        put("saturation_clients", "", self.clients.to_string());
        for (c, t) in &self.saturation_steps {
            put("saturation_step_ops_s", &c.to_string(), fmt(*t));
        }
        let l = &self.latency;
        put("latency_clients", "", l.clients.to_string());
        put("latency_mean_us", "", fmt(l.mean_us));
        put("latency_p99_us", "", fmt(l.p99_us));
        put("latency_lookup_us", "", fmt(l.lookup_us));
        put("latency_io_us", "", fmt(l.io_us));
        put("latency_nat_us", "", fmt(l.nat_us));
        put("latency_network_us", "", fmt(l.network_us));
        put("mean_hops", "", fmt(self.mean_hops));
        for (h, c) in &self.hop_histogram {
            put("hop_count", &h.to_string(), c.to_string());
        }
        for s in &self.cpu {
            put("cpu_storage", &s.name, fmt(s.storage));
            put("cpu_lookup", &s.name, fmt(s.lookup));
            put("cpu_nat", &s.name, fmt(s.nat));
            put("cpu_idle", &s.name, fmt(s.idle));
        }
        for t in &self.tables {
            let layer = t.layer.to_string();
            put("table_switches", &layer, t.switches.to_string());
            put("table_mean", &layer, fmt(t.mean));
            put("table_max", &layer, t.max.to_string());
        }
        put("errors", "", self.errors.to_string());
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SimError::Output(e.to_string());
        w.write_record(CSV_HEADER).map_err(err)?;
        let (servers, seed) = (self.servers.to_string(), self.seed.to_string());
        for (metric, subject, value) in self.rows() {
            w.write_record([
                self.scenario.as_str(),
                self.service.as_str(),
                self.profile.as_str(),
                &servers,
                &seed,
                metric,
                &subject,
                &value,
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| SimError::Output(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// `key=value` lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mean = |f: fn(&ServerCpu) -> f64| {
            let servers = &self.cpu[..self.servers.min(self.cpu.len())];
            servers.iter().map(f).sum::<f64>() / servers.len().max(1) as f64
        };
        let lines = [
            ("scenario", self.scenario.clone()),
            ("service", self.service.to_string()),
            ("profile", self.profile.to_string()),
            ("servers", self.servers.to_string()),
            ("seed", self.seed.to_string()),
            ("clients", self.clients.to_string()),
            ("throughput_ops_s", format!("{:.0}", self.throughput_ops_s)),
            ("oracle_ops_s", format!("{:.0}", self.oracle_ops_s)),
            ("bottleneck_ops_s", format!("{:.0}", self.bottleneck_ops_s)),
            ("latency_mean_us", format!("{:.3}", self.latency.mean_us)),
            ("latency_p99_us", format!("{:.3}", self.latency.p99_us)),
            ("mean_hops", format!("{:.3}", self.mean_hops)),
            ("cpu_storage", format!("{:.4}", mean(|c| c.storage))),
            ("cpu_lookup", format!("{:.4}", mean(|c| c.lookup))),
            ("cpu_nat", format!("{:.4}", mean(|c| c.nat))),
        ];
        for (k, v) in lines {
            writeln!(s, "{k}={v}").expect("write to string");
        }
        for t in &self.tables {
            writeln!(s, "table_{}_mean={:.1} table_{}_max={}", t.layer, t.mean, t.layer, t.max).expect("write");
        }
        s
    }
}

/// Shortest representation that round-trips, so reruns give identical bytes.
fn fmt(v: f64) -> String {
    format!("{v}")
}
