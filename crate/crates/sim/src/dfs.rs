//! Writing a batch of files through a metadata service under background load.

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::engine::{simulate, RunSpec};
use crate::workload::Workload;
use crate::{stream_rng, SimError, Service, STREAM_DFS};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DfsReport {
    pub service: Service,
    pub file_size: u64,
    pub files: u64,
    /// Mean metadata operation latency seen by the writer, seconds.
    pub metadata_latency_s: f64,
    /// Data transfer time of one file, seconds.
    pub transfer_s: f64,
    pub completion_s: f64,
}

/// One writer creates `total_bytes / file_size` files back to back; each file
/// costs one metadata operation and its data transfer. The metadata latency
/// is measured on the scenario's service while open-loop background
/// operations arrive at `bg_ops_per_s`.
pub fn dfs_write_scenario(cfg: &ScenarioConfig) -> Result<DfsReport, SimError> {
    cfg.validate()?;
    let d = &cfg.dfs;
    let w = Workload::build(cfg)?;
    let spec = RunSpec { open_rate: d.bg_ops_per_s, ..RunSpec::once(1, 100, d.samples.max(1)) };
    let res = simulate(&w, &spec, stream_rng(cfg.seed()?, STREAM_DFS));
    let metadata_latency_s = res.latency.mean_ns() / 1e9;
    let transfer_s = if d.data_gbps > 0.0 { d.file_size as f64 * 8.0 / (d.data_gbps * 1e9) } else { 0.0 };
    let files = d.total_bytes / d.file_size;
    Ok(DfsReport {
        service: cfg.service,
        file_size: d.file_size,
        files,
        metadata_latency_s,
        transfer_s,
        completion_s: files as f64 * (metadata_latency_s + transfer_s),
    })
}
