//! Command evaluation. Failures of a single evaluation point become error
//! rows; only config errors abort a command.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use icn_lab::capacity::{
    scenario_expected_hops, server_link_load_content, throughput_capacity, total_request_rate,
    total_traffic, Geometry,
};
use icn_lab::content::{
    occupancy_edge, occupancy_on_path, ContentCatalog, OccupancyProfile, TtlLaw,
};
use icn_lab::hopcount::Scenario;
use icn_lab::scaling::{verify_order, RhoLaw, SizeGrid};
use icn_lab::simulator::{
    Discovery, NetworkSpec, Prepared, SimConfig, SimMode, SimResult, Tally, TraceRecord,
};

use crate::config::{
    AnalyzeConfig, Evaluate, ExperimentConfig, OccupancySource, SimOccupancy, SweepParameter,
};
use crate::error::CliError;
use crate::rows::{ReportRow, ScalingRow, Source};

pub const FLAG_ALL_LOCAL: &str = "inf-sentinel";
pub const FLAG_NO_CACHE: &str = "no-cache";
pub const FLAG_PARTIAL: &str = "partial";

/// Event budget of a ttl run when none is configured.
pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000_000;

/// Resolves an occupancy source for a catalog on a given network.
pub fn resolve_profile(
    source: &OccupancySource,
    catalog: &ContentCatalog,
    grid_levels: Option<u32>,
) -> Result<OccupancyProfile, String> {
    match source {
        OccupancySource::Edge => occupancy_edge(catalog).map_err(|e| e.to_string()),
        OccupancySource::OnPath => {
            let levels = grid_levels.ok_or("on-path occupancy needs a grid network")?;
            occupancy_on_path(catalog, levels).map_err(|e| e.to_string())
        }
        OccupancySource::Uniform { rho } => {
            let values = if rho.len() == 1 {
                vec![rho[0]; catalog.len()]
            } else {
                rho.clone()
            };
            OccupancyProfile::uniform(values).map_err(|e| e.to_string())
        }
    }
}

/// Presence averaged over the cache-bearing nodes of a grid of `levels`
/// rings (4i nodes at level i), or the uniform value.
fn node_average_rho(profile: &OccupancyProfile, k: usize, levels: Option<u32>) -> f64 {
    if let Some(v) = profile.uniform_value(k) {
        return v;
    }
    let levels = levels.unwrap_or(profile.max_level().unwrap_or(0) as u32) as usize;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..=levels {
        num += 4.0 * i as f64 * profile.rho(k, i);
        den += 4.0 * i as f64;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn geometry_row(
    experiment: &str,
    scenario: Scenario,
    geometry: Geometry,
    source: Source,
) -> ReportRow {
    let mut row = ReportRow::new(experiment, scenario.label(), source);
    match geometry {
        Geometry::Grid { levels } => {
            row.levels = Some(levels);
            row.n = Some(geometry.node_count() as u64);
        }
        Geometry::Random { n, r } => {
            row.n = Some(n as u64);
            row.r = Some(r);
        }
    }
    row
}

fn grid_levels_of(geometry: Geometry) -> Option<u32> {
    match geometry {
        Geometry::Grid { levels } => Some(levels),
        Geometry::Random { .. } => None,
    }
}

/// Analytic rows of one (scenario, size) point: one per item, per-level
/// rows for level-dependent occupancy, then the catalog aggregate.
pub fn analyze_point(
    experiment: &str,
    scenario: Scenario,
    geometry: Geometry,
    catalog: &ContentCatalog,
    source: &OccupancySource,
) -> Vec<ReportRow> {
    let base = geometry_row(experiment, scenario, geometry, Source::Analytic);
    let fail = |message: String| {
        let mut row = base.clone();
        row.error = message;
        vec![row]
    };
    let levels = grid_levels_of(geometry);
    let profile = match resolve_profile(source, catalog, levels) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let alpha = catalog.popularities();
    let report = match throughput_capacity(scenario, &alpha, &profile, geometry) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let n = geometry.node_count();
    let mut rows = Vec::with_capacity(catalog.len() + 1);
    let (mut rate_sum, mut traffic_sum, mut rho_avg) = (0.0, 0.0, 0.0);
    for (k, item) in catalog.items().iter().enumerate() {
        let mut unit = vec![0.0; catalog.len()];
        unit[k] = 1.0;
        let evaluated =
            scenario_expected_hops(scenario, &unit, &profile, geometry).and_then(|e_h| {
                Ok((
                    e_h,
                    server_link_load_content(scenario, &profile, k, 1.0, geometry)?,
                ))
            });
        let (e_h, psi) = match evaluated {
            Ok(v) => v,
            Err(e) => return fail(e.to_string()),
        };
        let rho = node_average_rho(&profile, k, levels);
        let mut row = base.clone();
        row.content = k.to_string();
        row.rho = Some(rho);
        row.e_h = Some(e_h);
        row.psi = Some(psi);
        row.total_request_rate = Some(total_request_rate(n, rho, item.request_rate));
        row.total_traffic = Some(total_traffic(n, rho, item.request_rate, item.size, e_h));
        rate_sum += row.total_request_rate.unwrap_or(0.0);
        traffic_sum += row.total_traffic.unwrap_or(0.0);
        rho_avg += alpha[k] * rho;
        rows.push(row);
        if !profile.is_uniform() {
            for i in 1..=levels.unwrap_or(0) {
                let mut lr = base.clone();
                lr.content = k.to_string();
                lr.level = Some(i);
                lr.rho = Some(profile.rho(k, i as usize));
                rows.push(lr);
            }
        }
    }
    let mut all = base;
    all.rho = Some(rho_avg);
    all.e_h = Some(report.expected_hops);
    all.gamma_interference = Some(report.interference_bound);
    all.psi = Some(report.server_link_load);
    all.gamma_supportable = Some(report.supportable_rate);
    all.gamma_max = Some(report.gamma_max);
    all.regime = report.regime.label().to_string();
    all.total_request_rate = Some(rate_sum);
    all.total_traffic = Some(traffic_sum);
    if report.gamma_max.is_infinite() {
        all.add_flag(FLAG_ALL_LOCAL);
    }
    rows.push(all);
    rows
}

/// Every (scenario, size) point of the analyze section, in config order.
pub fn analyze(config: &ExperimentConfig) -> Vec<ReportRow> {
    analyze_with(&config.experiment, &config.analyze, &config.catalog)
}

fn analyze_with(experiment: &str, a: &AnalyzeConfig, catalog: &ContentCatalog) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &scenario in &a.scenarios {
        let geometries: Vec<Geometry> = match scenario {
            Scenario::GridPathwise | Scenario::GridRing => a
                .levels
                .iter()
                .map(|&levels| Geometry::Grid { levels })
                .collect(),
            Scenario::RandomPathwise => a
                .nodes
                .iter()
                .map(|&n| Geometry::Random {
                    n: n as f64,
                    r: a.range.at(n as f64),
                })
                .collect(),
        };
        for g in geometries {
            rows.extend(analyze_point(
                experiment,
                scenario,
                g,
                catalog,
                &a.occupancy,
            ));
            if a.no_cache_baseline {
                let empty = OccupancySource::Uniform { rho: vec![0.0] };
                rows.extend(
                    analyze_point(experiment, scenario, g, catalog, &empty)
                        .into_iter()
                        .map(|mut r| {
                            r.add_flag(FLAG_NO_CACHE);
                            r
                        }),
                );
            }
        }
    }
    rows
}

/// A finished simulation with its wall-clock time, which is kept out of
/// the result so outputs stay reproducible.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub result: SimResult,
    pub rows: Vec<ReportRow>,
    pub wall_clock: Duration,
}

/// Builds the simulator config for the simulate section.
pub fn sim_config(config: &ExperimentConfig) -> Result<SimConfig, CliError> {
    let s = config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config("simulate", "missing simulate section"))?;
    let grid_levels = match s.network {
        NetworkSpec::Grid { levels } => Some(levels),
        NetworkSpec::Random { .. } => None,
    };
    let occupancy = match &s.occupancy {
        SimOccupancy::Snapshot { profile, samples } => SimMode::Snapshot {
            profile: resolve_profile(profile, &config.catalog, grid_levels)
                .map_err(|e| CliError::config("simulate.occupancy.profile", e))?,
            samples: *samples,
        },
        SimOccupancy::Ttl {
            horizon,
            warmup,
            max_events,
        } => SimMode::Ttl {
            horizon: *horizon,
            warmup: *warmup,
            max_events: max_events.unwrap_or(DEFAULT_MAX_EVENTS),
        },
    };
    Ok(SimConfig {
        network: s.network,
        catalog: config.catalog.clone(),
        discovery: s.discovery,
        caching: s.caching,
        occupancy,
        descent: s.descent,
        seed: config.seed,
        batches: s.batches,
        trace_limit: s.trace_limit,
    })
}

fn sim_scenario(spec: &NetworkSpec, discovery: Discovery) -> &'static str {
    match (spec, discovery) {
        (NetworkSpec::Random { .. }, _) => Scenario::RandomPathwise.label(),
        (NetworkSpec::Grid { .. }, Discovery::Pathwise) => Scenario::GridPathwise.label(),
        (NetworkSpec::Grid { .. }, Discovery::Ring) => Scenario::GridRing.label(),
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Rows of a simulation result: per-item, per-level presence, aggregate.
pub fn result_rows(experiment: &str, cfg: &SimConfig, result: &SimResult) -> Vec<ReportRow> {
    let mut base = ReportRow::new(
        experiment,
        sim_scenario(&cfg.network, cfg.discovery),
        Source::Simulated,
    );
    match cfg.network {
        NetworkSpec::Grid { levels } => {
            base.levels = Some(levels);
            base.n = Some(2 * levels as u64 * (levels as u64 + 1));
        }
        NetworkSpec::Random { n, r, .. } => {
            base.n = Some(n as u64);
            base.r = Some(r);
        }
    }
    if result.partial {
        base.add_flag(FLAG_PARTIAL);
    }
    let mut rows = Vec::new();
    for c in &result.contents {
        let mut row = base.clone();
        row.content = c.content.to_string();
        row.rho = c.rho_mean.and_then(|e| finite(e.mean));
        row.e_h = finite(c.mean_hops.mean);
        row.stderr = c.mean_hops.stderr;
        row.total_request_rate = finite(c.total_request_rate.mean);
        row.total_traffic = finite(c.total_traffic.mean);
        rows.push(row);
        for (level, est) in c.rho_levels.iter().enumerate() {
            if let Some(est) = est {
                let mut lr = base.clone();
                lr.content = c.content.to_string();
                lr.level = Some(level as u32);
                lr.rho = finite(est.mean);
                lr.stderr = est.stderr;
                rows.push(lr);
            }
        }
    }
    let mut all = base;
    all.e_h = finite(result.mean_hops.mean);
    all.stderr = result.mean_hops.stderr;
    all.psi = finite(result.server_link_rate.mean);
    all.total_request_rate = finite(result.total_request_rate.mean);
    all.total_traffic = finite(result.total_traffic.mean);
    rows.push(all);
    rows
}

/// Runs replicas on the current rayon pool and merges them in index order,
/// so the result does not depend on the number of workers.
pub fn run_replicas(prepared: &Prepared, replicas: u64) -> SimResult {
    let tallies: Vec<Tally> = (0..replicas.max(1))
        .into_par_iter()
        .map(|i| prepared.run_replica(i))
        .collect();
    Tally::merge(tallies)
        .expect("at least one replica")
        .finish()
}

fn simulate_config(experiment: &str, cfg: SimConfig, replicas: u64) -> Result<SimOutcome, String> {
    let start = Instant::now();
    let prepared = Prepared::new(cfg.clone()).map_err(|e| e.to_string())?;
    let result = run_replicas(&prepared, replicas);
    let rows = result_rows(experiment, &cfg, &result);
    Ok(SimOutcome {
        result,
        rows,
        wall_clock: start.elapsed(),
    })
}

/// The simulate section. An invalid simulator config is a config error.
pub fn simulate(
    config: &ExperimentConfig,
    trace_limit: Option<usize>,
) -> Result<SimOutcome, CliError> {
    let mut cfg = sim_config(config)?;
    if let Some(limit) = trace_limit {
        cfg.trace_limit = cfg.trace_limit.max(limit);
    }
    let replicas = config.simulate.as_ref().map_or(1, |s| s.replicas);
    simulate_config(&config.experiment, cfg, replicas).map_err(|e| CliError::config("simulate", e))
}

/// Trace records of a result, in replica order.
pub fn trace_of(outcome: &SimOutcome) -> &[TraceRecord] {
    &outcome.result.trace
}

fn set_lifetime(
    catalog: &ContentCatalog,
    parameter: SweepParameter,
    v: f64,
) -> Result<ContentCatalog, String> {
    let mut mismatch = None;
    let out = catalog.map_items(|item| {
        item.ttl = match (parameter, item.ttl) {
            (SweepParameter::TimeoutRate, TtlLaw::Exponential { .. }) => {
                TtlLaw::Exponential { rate: v }
            }
            (SweepParameter::TimeoutMean, TtlLaw::Exponential { .. }) => {
                TtlLaw::Exponential { rate: 1.0 / v }
            }
            (SweepParameter::TtlDuration, TtlLaw::Fixed { refresh_on_hit, .. }) => TtlLaw::Fixed {
                duration: v,
                refresh_on_hit,
            },
            (_, law) => {
                mismatch = Some(parameter.name());
                law
            }
        }
    });
    if let Some(name) = mismatch {
        let expected = if parameter == SweepParameter::TtlDuration {
            "fixed"
        } else {
            "exponential"
        };
        return Err(format!("{name} applies to {expected} lifetimes only"));
    }
    out.map_err(|e| e.to_string())
}

/// Applies one sweep coordinate to a copy of the config.
pub fn apply_override(
    config: &mut ExperimentConfig,
    parameter: SweepParameter,
    v: f64,
) -> Result<(), String> {
    match parameter {
        SweepParameter::RequestRate => {
            config.catalog = config
                .catalog
                .map_items(|item| item.request_rate = v)
                .map_err(|e| e.to_string())?;
        }
        SweepParameter::TimeoutRate | SweepParameter::TimeoutMean | SweepParameter::TtlDuration => {
            config.catalog = set_lifetime(&config.catalog, parameter, v)?;
        }
        SweepParameter::Rho => {
            config.analyze.occupancy = OccupancySource::Uniform { rho: vec![v] };
            if let Some(s) = &mut config.simulate {
                match &mut s.occupancy {
                    SimOccupancy::Snapshot { profile, .. } => {
                        *profile = OccupancySource::Uniform { rho: vec![v] };
                    }
                    SimOccupancy::Ttl { .. } => return Err("rho cannot be set in ttl mode".into()),
                }
            }
        }
        SweepParameter::Levels => {
            config.analyze.levels = vec![v as u32];
            if let Some(s) = &mut config.simulate {
                match &mut s.network {
                    NetworkSpec::Grid { levels } => *levels = v as u32,
                    NetworkSpec::Random { .. } => {
                        return Err("levels applies to grid networks".into())
                    }
                }
            }
        }
        SweepParameter::RandomSize => {
            config.analyze.nodes = vec![v as usize];
            if let Some(s) = &mut config.simulate {
                match &mut s.network {
                    NetworkSpec::Random { n, .. } => *n = v as usize,
                    NetworkSpec::Grid { .. } => {
                        return Err("random_size applies to random networks".into())
                    }
                }
            }
        }
    }
    Ok(())
}

/// Cartesian grid of the sweep axes, first axis outermost.
pub fn sweep_points(
    config: &ExperimentConfig,
) -> Result<Vec<Vec<(SweepParameter, f64)>>, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep", "missing sweep section"))?;
    let mut points: Vec<Vec<(SweepParameter, f64)>> = vec![Vec::new()];
    for axis in &sweep.axes {
        let grid = axis.grid();
        points = points
            .into_iter()
            .flat_map(|p| {
                grid.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.parameter, v));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn tag(rows: &mut [ReportRow], point: &[(SweepParameter, f64)]) {
    for row in rows {
        if let Some(&(p, v)) = point.first() {
            row.axis_1 = p.name().to_string();
            row.value_1 = Some(v);
        }
        if let Some(&(p, v)) = point.get(1) {
            row.axis_2 = p.name().to_string();
            row.value_2 = Some(v);
        }
    }
}

fn sweep_point(
    config: &ExperimentConfig,
    evaluate: Evaluate,
    point: &[(SweepParameter, f64)],
) -> Vec<ReportRow> {
    let mut cfg = config.clone();
    let applied = point
        .iter()
        .try_for_each(|&(p, v)| apply_override(&mut cfg, p, v));
    let mut rows = match applied {
        Err(e) => {
            let mut row = ReportRow::new(&config.experiment, "", Source::Analytic);
            row.error = e;
            vec![row]
        }
        Ok(()) => match evaluate {
            Evaluate::Analytic => analyze(&cfg),
            Evaluate::Simulated => {
                let replicas = cfg.simulate.as_ref().map_or(1, |s| s.replicas);
                match sim_config(&cfg) {
                    Ok(sc) => match simulate_config(&cfg.experiment, sc, replicas) {
                        Ok(outcome) => outcome.rows,
                        Err(e) => {
                            let mut row = ReportRow::new(&cfg.experiment, "", Source::Simulated);
                            row.error = e;
                            vec![row]
                        }
                    },
                    Err(e) => {
                        let mut row = ReportRow::new(&cfg.experiment, "", Source::Simulated);
                        row.error = e.to_string();
                        vec![row]
                    }
                }
            }
        },
    };
    tag(&mut rows, point);
    rows
}

/// Long-format rows over the sweep grid, points evaluated in parallel and
/// emitted in grid order.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<ReportRow>, CliError> {
    let points = sweep_points(config)?;
    let evaluate = config
        .sweep
        .as_ref()
        .map_or(Evaluate::Analytic, |s| s.evaluate);
    let parts: Vec<Vec<ReportRow>> = points
        .par_iter()
        .map(|p| sweep_point(config, evaluate, p))
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

fn rho_law_label(law: &RhoLaw) -> String {
    match *law {
        RhoLaw::Constant { rho } => format!("const({rho})"),
        RhoLaw::Power {
            coefficient,
            exponent,
        } => format!("{coefficient}*n^-{exponent}"),
    }
}

fn sizes_label(sizes: &SizeGrid) -> String {
    let nodes: Vec<String> = match sizes {
        SizeGrid::Levels(v) => v
            .iter()
            .map(|&l| (2 * l as u64 * (l as u64 + 1)).to_string())
            .collect(),
        SizeGrid::Nodes(v) => v.iter().map(|n| n.to_string()).collect(),
    };
    nodes.join(";")
}

/// One verdict row per scaling check.
pub fn scaling(config: &ExperimentConfig) -> Vec<ScalingRow> {
    config
        .scaling
        .checks_or_standard()
        .par_iter()
        .map(|c| {
            let sizes = c
                .sizes
                .clone()
                .unwrap_or_else(|| SizeGrid::default_for(c.scenario));
            let mut row = ScalingRow {
                experiment: config.experiment.clone(),
                metric: c.metric.label().to_string(),
                scenario: c.scenario.label().to_string(),
                rho_law: rho_law_label(&c.rho_law),
                sizes: sizes_label(&sizes),
                slope: None,
                r_squared: None,
                predicted: None,
                tolerance: Some(c.tolerance),
                pass: None,
                straddles: None,
                regime: String::new(),
                error: String::new(),
            };
            match verify_order(
                c.metric,
                c.scenario,
                c.rho_law,
                c.range,
                &sizes,
                c.tolerance,
            ) {
                Ok(v) => {
                    row.slope = Some(v.fit.slope);
                    row.r_squared = Some(v.fit.r_squared);
                    row.predicted = Some(v.predicted + 0.0);
                    row.pass = Some(v.pass);
                    row.straddles = Some(v.straddles);
                    row.regime = v.regime;
                }
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect()
}
