//! Discrete-event simulator comparing in-network metadata lookup with DHT,
//! hash-based and coordinator lookup services.

pub mod census;
pub mod config;
pub mod cost;
pub mod dfs;
pub mod engine;
pub mod report;
pub mod workload;

use metaflow_core::baselines::BaselineError;
use metaflow_core::overlay::OverlayError;
use metaflow_core::topology::TopologyError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use census::{flow_table_census, LayerCensus};
pub use config::{ScenarioConfig, Service};
pub use cost::{calibrate, throughput_oracle, CostModel, Profile};
pub use dfs::{dfs_write_scenario, DfsReport};
pub use report::{measure_latency, run_scenario, LatencySummary, MetricsReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("output: {0}")]
    Output(String),
}

pub(crate) const STREAM_PRELOAD: u64 = 1;
pub(crate) const STREAM_ORACLE: u64 = 2;
pub(crate) const STREAM_LATENCY: u64 = 3;
pub(crate) const STREAM_DFS: u64 = 4;
/// The saturation search, all steps of it.
pub(crate) const STREAM_SATURATION: u64 = 16;

/// Independent generator for one phase of a scenario.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
