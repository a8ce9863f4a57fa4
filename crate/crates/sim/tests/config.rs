use metaflow_sim::{ScenarioConfig, Service, SimError};

const MINIMAL: &str = r#"
name = "t"
seed = 9
service = "onehop"
profile = "leveldb-ssd"
"#;

#[test]
fn seed_is_required() {
    let err = ScenarioConfig::from_toml("service = \"chord\"").unwrap_err();
    assert!(matches!(err, SimError::Config(m) if m.contains("seed")));
}

#[test]
fn minimal_config_takes_defaults() {
    let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
    assert_eq!(c.service, Service::Onehop);
    assert_eq!(c.workload.get_fraction, 0.20);
    assert_eq!((c.workload.get_size, c.workload.put_size), (250, 290));
    assert_eq!(c.build_topology().unwrap().active_servers().count(), 200);
    let m = c.cost_model().unwrap();
    assert_eq!(m.io_cost, 30.0);
}

#[test]
fn rejects_bad_values() {
    for extra in [
        "[workload]\nget_fraction = 1.5",
        "[overlay]\nsplit_lo = 0.7",
        "[cost]\nserver_capacity = 0.0",
        "[cost]\nio_cost = -1.0",
        "[run]\nmeasure_ops = 0",
        "unknown_key = 1",
        "profile = \"rocksdb\"",
    ] {
        let text = format!("seed = 1\n{extra}\n");
        assert!(ScenarioConfig::from_toml(&text).is_err(), "{extra}");
    }
}

#[test]
fn ipv6_mode_is_not_a_config_option() {
    assert!(ScenarioConfig::from_toml("seed = 1\naddress_bits = 128\n").is_err());
}

#[test]
fn overrides_use_dotted_paths() {
    let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
    let d = c.with_override("servers", "50").unwrap();
    assert_eq!(d.build_topology().unwrap().active_servers().count(), 50);
    let d = d.with_override("service", "chord").unwrap().with_override("run.measure_ops", "7").unwrap();
    assert_eq!(d.service, Service::Chord);
    assert_eq!(d.run.measure_ops, 7);
    assert_eq!(d.seed, Some(9));
    assert!(c.with_override("run.nope", "1").is_err());
    assert!(c.with_override("servers", "100000").is_err());
}
