//! `metaflow`: run simulator scenarios and sweeps, dump controller flow
//! tables, validate configs and calibrate the cost model.
//!
//! Exit codes: 0 on success, 1 on a runtime error (one `error kind=... `
//! line on stderr), 2 on a usage error.

mod fixture;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metaflow_core::overlay::OverlayError;
use metaflow_core::topology::TopologyError;
use metaflow_sim::cost::{CostModel, DEFAULT_TARGET_REDUCTION};
use metaflow_sim::{calibrate, dfs_write_scenario, run_scenario, Profile, ScenarioConfig, Service, SimError};
use rayon::prelude::*;
use thiserror::Error;

use fixture::{switch_tables, TableFixture};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Sim(SimError::Config(_)) => "config",
            CliError::Sim(SimError::Topology(_)) | CliError::Topology(_) => "topology",
            CliError::Sim(SimError::Overlay(_)) | CliError::Overlay(_) => "overlay",
            CliError::Sim(SimError::Baseline(_)) => "baseline",
            CliError::Sim(SimError::Infeasible(_)) => "infeasible",
            CliError::Sim(SimError::Output(_)) | CliError::Io { .. } => "io",
        }
    }
}

#[derive(Parser)]
#[command(name = "metaflow", version, about = "In-network metadata lookup: simulator and controller tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario (or, for dump-tables, fixture) TOML file.
    #[arg(long, value_parser = existing_file)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_service)]
    service: Option<Service>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: CSV to --out (default `results`), summary to stdout.
    Run {
        #[command(flatten)]
        common: Common,
        /// Run the file-writing scenario instead of the saturation run.
        #[arg(long)]
        dfs: bool,
    },
    /// Run the cartesian product of --vary lists, one CSV per scenario plus index.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,...`; keys are dotted config paths, `servers` for the active server count.
        #[arg(long, required = true, value_parser = parse_vary)]
        vary: Vec<(String, Vec<String>)>,
    },
    /// Print (or with --out, write one file per switch) the flow tables of a fixture.
    DumpTables {
        #[command(flatten)]
        common: Common,
    },
    /// Check a scenario config without running it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve for the lookup cost that pins Chord's reduction at 200 servers;
    /// prints the frozen model as a `[cost]` section.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_TARGET_REDUCTION)]
        target: f64,
    },
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn parse_service(s: &str) -> Result<Service, String> {
    s.parse().map_err(|e: SimError| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: SimError| e.to_string())
}

fn parse_vary(s: &str) -> Result<(String, Vec<String>), String> {
    let (k, vs) = s.split_once('=').ok_or_else(|| format!("expected key=v1,v2,..., got `{s}`"))?;
    let values: Vec<String> = vs.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
    if k.trim().is_empty() || values.is_empty() {
        return Err(format!("expected key=v1,v2,..., got `{s}`"));
    }
    Ok((k.trim().to_string(), values))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load(c: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::from_toml_unchecked(&read(&c.config)?)?;
    if let Some(seed) = c.seed {
        cfg.seed = Some(seed);
    }
    if let Some(s) = c.service {
        cfg.service = s;
    }
    if let Some(p) = c.profile {
        cfg.profile = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Run { common, dfs } => {
            let cfg = load(&common)?;
            let dir = out_dir(&common);
            if dfs {
                let r = dfs_write_scenario(&cfg)?;
                let text = format!(
                    "scenario={}\nservice={}\nfile_size={}\nfiles={}\nmetadata_latency_us={:.3}\ntransfer_us={:.3}\ncompletion_s={:.3}\n",
                    cfg.name,
                    r.service,
                    r.file_size,
                    r.files,
                    r.metadata_latency_s * 1e6,
                    r.transfer_s * 1e6,
                    r.completion_s
                );
                write(&dir.join(format!("{}.dfs.txt", cfg.name)), &text)?;
                return Ok(text);
            }
            let report = run_scenario(&cfg)?;
            write(&dir.join(format!("{}.csv", cfg.name)), &report.to_csv())?;
            Ok(report.summary())
        }
        Command::Sweep { common, vary } => sweep(&common, &vary),
        Command::DumpTables { common } => dump_tables(&common),
        Command::Validate { common } => {
            let cfg = load(&common)?;
            let topo = cfg.build_topology()?;
            Ok(format!(
                "ok scenario={} service={} profile={} servers={}\n",
                cfg.name,
                cfg.service,
                cfg.profile,
                topo.active_servers().count()
            ))
        }
        Command::Calibrate { common, target } => {
            let cfg = load(&common)?;
            let m = calibrate(&cfg, target)?;
            let text = cost_section(&m);
            if let Some(dir) = &common.out {
                write(&dir.join("cost.toml"), &text)?;
            }
            Ok(text)
        }
    }
}

/// The model as a `[cost]` override section that a scenario can include.
fn cost_section(m: &CostModel) -> String {
    let us = |s: f64| s * 1e6;
    let mut s = String::from("[cost]\n");
    let lines = [
        ("server_capacity", m.server_capacity),
        ("io_cost", m.io_cost),
        ("io_latency_us", us(m.io_latency)),
        ("lookup_hop_cost", m.lookup_hop_cost),
        ("lookup_latency_us", us(m.lookup_latency)),
        ("nat_cost", m.nat_cost),
        ("nat_latency_us", us(m.nat_latency)),
        ("link_latency_us", us(m.link_latency)),
        ("link_gbps", m.link_bandwidth * 8.0 / 1e9),
    ];
    for (k, v) in lines {
        writeln!(s, "{k} = {v:?}").expect("write to string");
    }
    s
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.=".contains(c) { c } else { '_' }).collect()
}

fn sweep(common: &Common, vary: &[(String, Vec<String>)]) -> Result<String, CliError> {
    let base = load(common)?;
    let mut combos: Vec<Vec<(&str, &str)>> = vec![Vec::new()];
    for (k, values) in vary {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((k.as_str(), v.as_str()));
                    c
                })
            })
            .collect();
    }
    let mut scenarios = Vec::new();
    for combo in &combos {
        let mut cfg = base.clone();
        let mut name = base.name.clone();
        for (k, v) in combo {
            cfg = cfg.with_override(k, v)?;
            write!(name, "__{k}={v}").expect("write to string");
        }
        cfg.name = file_safe(&name);
        scenarios.push(cfg);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("METAFLOW_SIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let reports = pool.install(|| scenarios.par_iter().map(run_scenario).collect::<Vec<_>>());

    let dir = out_dir(common);
    let mut index = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scenario".to_string(), "file".into()];
    header.extend(vary.iter().map(|(k, _)| k.clone()));
    header.extend(["throughput_ops_s", "oracle_ops_s", "latency_mean_us"].map(String::from));
    index.write_record(&header).map_err(|e| CliError::Sim(SimError::Output(e.to_string())))?;
    let mut out = String::new();
    for ((cfg, combo), report) in scenarios.iter().zip(&combos).zip(reports) {
        let report = report?;
        let file = format!("{}.csv", cfg.name);
        write(&dir.join(&file), &report.to_csv())?;
        let mut row = vec![cfg.name.clone(), file.clone()];
        row.extend(combo.iter().map(|(_, v)| v.to_string()));
        row.push(format!("{}", report.throughput_ops_s));
        row.push(format!("{}", report.oracle_ops_s));
        row.push(format!("{}", report.latency.mean_us));
        index.write_record(&row).map_err(|e| CliError::Sim(SimError::Output(e.to_string())))?;
        writeln!(out, "{} throughput_ops_s={:.0}", cfg.name, report.throughput_ops_s).expect("write to string");
    }
    let index = index.into_inner().map_err(|e| CliError::Sim(SimError::Output(e.to_string())))?;
    write(&dir.join("index.csv"), &String::from_utf8(index).expect("csv is utf-8"))?;
    Ok(out)
}

fn dump_tables(common: &Common) -> Result<String, CliError> {
    let fx = TableFixture::from_toml(&read(&common.config)?)?;
    let mut tree = fx.initial()?;
    let before = if fx.insert.is_empty() { None } else { Some(switch_tables(&tree)?) };
    fx.apply_inserts(&mut tree)?;
    let after = switch_tables(&tree)?;

    let Some(dir) = &common.out else {
        let mut out = String::new();
        let stages: Vec<(&str, &Vec<(String, String)>)> = match &before {
            Some(b) => vec![("before ", b), ("", &after)],
            None => vec![("", &after)],
        };
        for (label, tables) in stages {
            for (name, text) in tables {
                writeln!(out, "## {label}{name}").expect("write to string");
                out.push_str(text);
            }
        }
        return Ok(out);
    };
    let mut out = String::new();
    if let Some(b) = &before {
        for (name, text) in b {
            let p = dir.join("before").join(format!("{name}.txt"));
            write(&p, text)?;
            writeln!(out, "{}", p.display()).expect("write to string");
        }
    }
    for (name, text) in &after {
        let p = dir.join(format!("{name}.txt"));
        write(&p, text)?;
        writeln!(out, "{}", p.display()).expect("write to string");
    }
    Ok(out)
}
