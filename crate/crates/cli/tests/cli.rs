use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metaflow"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A 50-server scenario with short windows.
fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(
        &p,
        r#"
name = "small"
seed = 4
service = "hashmod"

[topology]
kind = "three-tier"
core_fanout = 2
agg_fanout = 5
edge_fanout = 5

[run]
measure_ops = 20000
latency_ops = 2000

[overlay]
leaf_capacity = 200
"#,
    )
    .unwrap();
    p
}

#[test]
fn missing_config_is_a_usage_error() {
    assert_eq!(run(&["run"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--config", fixture("listing.toml").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_one_with_kind() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "service = \"metaflow\"\n").unwrap();
    let o = run(&["validate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error kind=config "), "{err}");
    assert!(err.contains("seed"), "{err}");

    // The seed can come from the command line instead.
    let o = run(&["validate", "--config", p.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(stdout(&o), "ok scenario=scenario service=metaflow profile=redis servers=200\n");

    fs::write(&p, "seed = 1\n[topology]\nkind = \"three-tier\"\ncore_fanout = 2\n").unwrap();
    let o = run(&["validate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=topology "));
}

#[test]
fn dump_tables_matches_goldens() {
    let golden = |n: &str| fs::read_to_string(fixture("golden").join(n)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let o = run(&["dump-tables", "--config", fixture("listing.toml").to_str().unwrap(), "--out", out]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("SwitchA.txt")).unwrap(), golden("listing_SwitchA.txt"));
    assert!(!dir.path().join("before").exists());

    let o = run(&["dump-tables", "--config", fixture("split.toml").to_str().unwrap(), "--out", out]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("before/SwitchD.txt")).unwrap(), golden("split_before_SwitchD.txt"));
    assert_eq!(fs::read_to_string(dir.path().join("SwitchD.txt")).unwrap(), golden("split_after_SwitchD.txt"));
}

#[test]
fn dump_tables_to_stdout() {
    let o = run(&["dump-tables", "--config", fixture("listing.toml").to_str().unwrap()]);
    let text = stdout(&o);
    let a = text.split("## SwitchA\n").nth(1).unwrap();
    let a = a.split("## ").next().unwrap();
    assert_eq!(a, fs::read_to_string(fixture("golden/listing_SwitchA.txt")).unwrap());
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--service", "ideal"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("throughput_ops_s=")), "{text}");
    assert!(text.contains("service=ideal"));
    let csv = fs::read_to_string(out.join("small.csv")).unwrap();
    assert!(csv.starts_with("scenario,service,profile,servers,seed,metric,subject,value\n"));
    assert!(csv.contains("small,ideal,redis,50,4,throughput_ops_s,,"));
}

#[test]
fn sweep_writes_one_csv_per_point_and_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sweep = |out: &Path, threads: &str| {
        let o = bin()
            .env("METAFLOW_SIM_THREADS", threads)
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--vary", "service=hashmod,metaflow,onehop,central"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("index.csv")).unwrap()
    };
    let a = sweep(&dir.path().join("a"), "1");
    let b = sweep(&dir.path().join("b"), "3");
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "scenario,file,service,throughput_ops_s,oracle_ops_s,latency_mean_us");
    assert_eq!(lines.len(), 5);
    for s in ["hashmod", "metaflow", "onehop", "central"] {
        let file = format!("small__service={s}.csv");
        assert!(dir.path().join("a").join(&file).is_file(), "{file}");
        assert!(a.contains(&format!(",{file},{s},")));
    }
}

#[test]
fn calibrate_prints_a_cost_section() {
    let dir = tempfile::tempdir().unwrap();
    // Calibration pins Chord on 200 servers, more than the small tree has.
    let small = small_config(dir.path());
    let o = run(&["calibrate", "--config", small.to_str().unwrap()]);
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=topology "));
    let cfg = dir.path().join("default.toml");
    fs::write(&cfg, "seed = 4\n").unwrap();
    let out = dir.path().join("cal");
    let o = run(&["calibrate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("[cost]\n"));
    assert_eq!(fs::read_to_string(out.join("cost.toml")).unwrap(), text);
    let hop: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("lookup_hop_cost = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(hop > 0.0);

    let o = run(&["calibrate", "--config", cfg.to_str().unwrap(), "--target", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=infeasible "));
}

#[test]
fn dfs_run_reports_completion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap()
        + "\n[dfs]\nfile_size = 67108864\ntotal_bytes = 1073741824\nbg_ops_per_s = 0.0\nsamples = 200\n";
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("dfs");
    let o = run(&["run", "--dfs", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("files=16\n"), "{text}");
    assert_eq!(fs::read_to_string(out.join("small.dfs.txt")).unwrap(), text);
}
