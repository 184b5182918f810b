use super::*;
use crate::content::ContentItem;
use crate::hopcount::{expected_hops_levelwise, expected_hops_random_cells};

fn catalog(beta: f64, ttl: TtlLaw) -> ContentCatalog {
    ContentCatalog::single(1.0, beta, ttl).unwrap()
}

fn exp_ttl(rate: f64) -> TtlLaw {
    TtlLaw::Exponential { rate }
}

fn snapshot(levels: u32, rho: f64, samples: u64, discovery: Discovery) -> SimConfig {
    SimConfig {
        network: NetworkSpec::Grid { levels },
        catalog: catalog(1.0, exp_ttl(1.0)),
        discovery,
        caching: Caching::EdgeOnly,
        occupancy: SimMode::Snapshot {
            profile: OccupancyProfile::uniform(vec![rho]).unwrap(),
            samples,
        },
        descent: DescentRule::Uniform,
        seed: 11,
        batches: 20,
        trace_limit: 0,
    }
}

fn ttl(levels: u32, beta: f64, law: TtlLaw, horizon: f64, warmup: f64) -> SimConfig {
    SimConfig {
        network: NetworkSpec::Grid { levels },
        catalog: catalog(beta, law),
        discovery: Discovery::Pathwise,
        caching: Caching::EdgeOnly,
        occupancy: SimMode::Ttl {
            horizon,
            warmup,
            max_events: default_max_events(),
        },
        descent: DescentRule::Uniform,
        seed: 5,
        batches: 20,
        trace_limit: 0,
    }
}

#[test]
fn snapshot_full_caches_serve_locally() {
    let r = run_occupancy_snapshot(snapshot(5, 1.0, 1000, Discovery::Pathwise)).unwrap();
    assert_eq!(r.mean_hops.mean, 0.0);
    assert_eq!(r.server_link_rate.mean, 0.0);
    let r = run_occupancy_snapshot(snapshot(5, 1.0, 1000, Discovery::Ring)).unwrap();
    assert_eq!(r.mean_hops.mean, 0.0);
}

#[test]
fn snapshot_without_caching_matches_hand_value() {
    let r = run_occupancy_snapshot(snapshot(2, 0.0, 100_000, Discovery::Pathwise)).unwrap();
    assert!(r.mean_hops.within(5.0 / 3.0, 3.0), "{:?}", r.mean_hops);
    // All twelve nodes at rate one go to the server: three per link.
    assert!((measure_server_load(&r).mean - 3.0).abs() < 1e-9);
}

#[test]
fn snapshot_pathwise_matches_levelwise_sum() {
    let g = build_grid(20).unwrap();
    let want =
        expected_hops_levelwise(&g, &OccupancyProfile::uniform(vec![0.5]).unwrap(), 0).unwrap();
    let r = run_occupancy_snapshot(snapshot(20, 0.5, 100_000, Discovery::Pathwise)).unwrap();
    assert!(r.mean_hops.within(want, 3.0), "{:?} vs {want}", r.mean_hops);
    let rho = r.contents[0].rho_mean.unwrap();
    assert!(rho.within(0.5, 4.0), "{rho:?}");
}

#[test]
fn snapshot_error_shrinks_with_samples() {
    let small = run_occupancy_snapshot(snapshot(10, 0.3, 10_000, Discovery::Pathwise)).unwrap();
    let large = run_occupancy_snapshot(snapshot(10, 0.3, 100_000, Discovery::Pathwise)).unwrap();
    let ratio = small.mean_hops.stderr.unwrap() / large.mean_hops.stderr.unwrap();
    assert!((2.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn snapshot_random_network_matches_cell_recursion() {
    let mut cfg = snapshot(1, 0.2, 100_000, Discovery::Pathwise);
    cfg.network = NetworkSpec::Random {
        n: 400,
        r: 0.2,
        topology_seed: Some(3),
    };
    let prepared = Prepared::new(cfg).unwrap();
    let Network::Random { lattice, .. } = &prepared.network else {
        panic!("random network expected")
    };
    let want = expected_hops_random_cells(lattice, 0.2).unwrap();
    let r = prepared.run(1);
    assert!(r.mean_hops.within(want, 3.0), "{:?} vs {want}", r.mean_hops);
}

#[test]
fn traces_recount_to_the_logged_hops() {
    let mut configs = vec![
        snapshot(8, 0.2, 2000, Discovery::Pathwise),
        snapshot(8, 0.2, 2000, Discovery::Ring),
        ttl(6, 1.0, exp_ttl(1.0), 200.0, 20.0),
    ];
    let mut random = snapshot(1, 0.1, 2000, Discovery::Pathwise);
    random.network = NetworkSpec::Random {
        n: 900,
        r: 0.1,
        topology_seed: None,
    };
    configs.push(random);
    let mut onpath_ring = ttl(6, 1.0, exp_ttl(2.0), 200.0, 20.0);
    onpath_ring.discovery = Discovery::Ring;
    onpath_ring.caching = Caching::OnPath;
    configs.push(onpath_ring);
    for mut cfg in configs {
        cfg.trace_limit = 1000;
        let prepared = Prepared::new(cfg).unwrap();
        let r = prepared.run(1);
        assert_eq!(r.trace.len(), 1000);
        assert_eq!(hop_mismatches(&prepared.network, &r.trace).count(), 0);
    }
}

#[test]
fn ttl_without_requests_stays_empty() {
    let r = run_ttl_simulation(ttl(4, 0.0, exp_ttl(1.0), 100.0, 10.0)).unwrap();
    assert_eq!(r.events.requests, 0);
    for level in 1..=4 {
        assert_eq!(r.contents[0].rho_levels[level].unwrap().mean, 0.0);
    }
}

#[test]
fn ttl_edge_exponential_presence() {
    let r = run_ttl_simulation(ttl(10, 1.0, exp_ttl(1.0), 2000.0, 200.0)).unwrap();
    let rho = r.contents[0].rho_mean.unwrap();
    assert!((rho.mean - 0.5).abs() < 0.01, "{rho:?}");
    assert!(r.accounting_error < 1e-9 * 2000.0, "{}", r.accounting_error);
    assert!(!r.partial);
}

#[test]
fn ttl_fixed_edge_presence() {
    let law = TtlLaw::Fixed {
        duration: std::f64::consts::LN_2,
        refresh_on_hit: true,
    };
    let r = run_ttl_simulation(ttl(6, 1.0, law, 2000.0, 100.0)).unwrap();
    let rho = r.contents[0].rho_mean.unwrap();
    assert!((rho.mean - 0.5).abs() < 0.01, "{rho:?}");
}

#[test]
fn ttl_zero_expiry_rate_never_expires() {
    let r = run_ttl_simulation(ttl(3, 1.0, exp_ttl(0.0), 200.0, 50.0)).unwrap();
    assert_eq!(r.events.expiries, 0);
    assert!(r.contents[0].rho_mean.unwrap().mean > 0.99);
}

#[test]
fn ttl_server_load_matches_flow_formula() {
    // Edge caching with rho = 1/2; the server-link rate is psi at gamma = 1
    // times the per-node request rate.
    let r = run_ttl_simulation(ttl(10, 1.0, exp_ttl(1.0), 3000.0, 300.0)).unwrap();
    let psi: f64 = (1..=10).map(|i| i as f64 * 0.5f64.powi(i)).sum();
    let got = measure_server_load(&r).mean;
    assert!((got / psi - 1.0).abs() < 0.05, "{got} vs {psi}");
}

#[test]
fn event_budget_flags_partial_result() {
    let mut cfg = ttl(4, 1.0, exp_ttl(1.0), 1000.0, 10.0);
    cfg.occupancy = SimMode::Ttl {
        horizon: 1000.0,
        warmup: 10.0,
        max_events: 500,
    };
    let r = run_ttl_simulation(cfg).unwrap();
    assert!(r.partial);
    assert!(r.sim_clock < 1000.0);
    assert!(r.events.requests + r.events.expiries <= 500);
}

#[test]
fn runs_are_deterministic() {
    for cfg in [
        snapshot(6, 0.4, 5000, Discovery::Ring),
        ttl(5, 1.0, exp_ttl(0.5), 100.0, 10.0),
    ] {
        let a = simulate(cfg.clone()).unwrap();
        let b = simulate(cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn replicas_merge_in_order() {
    let prepared = Prepared::new(snapshot(4, 0.3, 1000, Discovery::Pathwise)).unwrap();
    let a = prepared.run(3);
    let b = Tally::merge((0..3).map(|i| prepared.run_replica(i)).collect())
        .unwrap()
        .finish();
    assert_eq!(a, b);
    assert_eq!(a.batches, 60);
    assert_ne!(prepared.run_replica(0), prepared.run_replica(1));
}

#[test]
fn paired_ring_never_exceeds_path() {
    for rho in [0.05, 0.3, 0.8] {
        let p = run_paired_snapshot(snapshot(15, rho, 20_000, Discovery::Pathwise)).unwrap();
        assert_eq!(p.violations, 0);
        assert!(p.ring.mean_hops.mean <= p.pathwise.mean_hops.mean);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = snapshot(3, 0.5, 1000, Discovery::Ring);
    cfg.network = NetworkSpec::Random {
        n: 50,
        r: 0.5,
        topology_seed: None,
    };
    assert_eq!(Prepared::new(cfg).unwrap_err(), SimError::RingOnRandom);
    assert!(matches!(
        Prepared::new(ttl(3, 1.0, exp_ttl(1.0), 10.0, 10.0)),
        Err(SimError::Horizon { .. })
    ));
    let mut cfg = snapshot(3, 0.5, 1000, Discovery::Pathwise);
    cfg.batches = 5;
    assert!(matches!(
        Prepared::new(cfg),
        Err(SimError::TooFewBatches { .. })
    ));
    let mut cfg = snapshot(3, 0.5, 1000, Discovery::Pathwise);
    cfg.occupancy = SimMode::Snapshot {
        profile: OccupancyProfile::levelwise(vec![vec![1.0, 0.5]]).unwrap(),
        samples: 1000,
    };
    assert!(matches!(Prepared::new(cfg), Err(SimError::Content(_))));
    assert!(run_ttl_simulation(snapshot(3, 0.5, 1000, Discovery::Pathwise)).is_err());
}

#[test]
fn on_path_copies_fill_the_path() {
    let law = TtlLaw::Fixed {
        duration: 1e9,
        refresh_on_hit: false,
    };
    let mut cfg = ttl(4, 0.01, law, 2000.0, 1000.0);
    cfg.caching = Caching::OnPath;
    let r = run_ttl_simulation(cfg).unwrap();
    // With effectively infinite lifetimes every cache fills.
    for level in 1..=4 {
        assert!(r.contents[0].rho_levels[level].unwrap().mean > 0.99);
    }
    assert_eq!(r.events.expiries, 0);
}

#[test]
fn multi_content_requests_follow_rates() {
    let items = vec![
        ContentItem {
            size: 2.0,
            popularity: 0.5,
            request_rate: 1.0,
            ttl: exp_ttl(1.0),
        },
        ContentItem {
            size: 1.0,
            popularity: 0.5,
            request_rate: 3.0,
            ttl: exp_ttl(1.0),
        },
    ];
    let mut cfg = ttl(3, 1.0, exp_ttl(1.0), 500.0, 50.0);
    cfg.catalog = ContentCatalog::new(items).unwrap();
    let r = run_ttl_simulation(cfg).unwrap();
    let n = 24.0;
    assert!((r.contents[0].request_rate.mean / n - 1.0).abs() < 0.05);
    assert!((r.contents[1].request_rate.mean / (3.0 * n) - 1.0).abs() < 0.05);
    let rho1 = r.contents[1].rho_mean.unwrap().mean;
    assert!((rho1 - 0.75).abs() < 0.02, "{rho1}");
}
