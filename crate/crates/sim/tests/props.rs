use metaflow_core::topology::{TopologyKind, TopologySpec};
use metaflow_sim::engine::{simulate, RunSpec};
use metaflow_sim::workload::Workload;
use metaflow_sim::{Profile, ScenarioConfig, Service};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn service() -> impl Strategy<Value = Service> {
    prop::sample::select(Service::ALL.to_vec())
}

fn profile() -> impl Strategy<Value = Profile> {
    prop::sample::select(Profile::ALL.to_vec())
}

fn config(service: Service, profile: Profile, edge: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.seed = Some(1);
    c.service = service;
    c.profile = profile;
    c.topology = TopologySpec {
        kind: Some(TopologyKind::ThreeTier),
        core_fanout: Some(2),
        agg_fanout: Some(2),
        edge_fanout: Some(edge),
        ..TopologySpec::default()
    };
    c.overlay.leaf_capacity = 100;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Latency parts add up and CPU shares are fractions of the window.
    #[test]
    fn run_invariants(
        s in service(),
        p in profile(),
        edge in 1usize..6,
        clients in 1usize..300,
        seed in any::<u64>(),
    ) {
        let c = config(s, p, edge);
        let w = Workload::build(&c).unwrap();
        let r = simulate(&w, &RunSpec::once(clients, clients as u64, 4_000), ChaCha8Rng::seed_from_u64(seed));
        let l = &r.latency;
        prop_assert_eq!(l.components.iter().sum::<u128>(), l.total);
        prop_assert_eq!(l.count, 4_000);
        prop_assert!(l.percentile_ns(0.5) <= l.percentile_ns(0.99));
        for i in 0..w.resources().len() {
            let u = r.utilization(i);
            prop_assert!(u.iter().all(|v| (0.0..=1.0 + 1e-9).contains(v)), "{:?}", u);
            prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9 || u[3] == 0.0);
        }
    }

    #[test]
    fn same_seed_same_run(s in service(), seed in any::<u64>()) {
        let w = Workload::build(&config(s, Profile::Redis, 3)).unwrap();
        let spec = RunSpec::once(40, 40, 1_000);
        let a = simulate(&w, &spec, ChaCha8Rng::seed_from_u64(seed));
        let b = simulate(&w, &spec, ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a.latency, b.latency);
        prop_assert_eq!(a.busy, b.busy);
        prop_assert_eq!(a.window_ns, b.window_ns);
    }
}
