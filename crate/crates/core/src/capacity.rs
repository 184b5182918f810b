//! Throughput capacity: interference bound, server-link load and the
//! combined maximum download rate, plus the traffic metrics of sweeps.
//!
//! Bandwidth and per-link capacity are normalized to 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::OccupancyProfile;
use crate::hopcount::{
    self, expected_hops_grid_ring, expected_hops_random_pathwise, HopError, Normalization, Scenario,
};
use crate::topology::{GridTopology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error(transparent)]
    Hops(#[from] HopError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("scenario {0} has no formula for level-dependent occupancy")]
    LevelwiseUnsupported(Scenario),
    #[error("scenario {scenario} needs a {expected} geometry")]
    GeometryMismatch {
        scenario: Scenario,
        expected: &'static str,
    },
    #[error("{0} popularities for {1} occupancy rows")]
    ContentCount(usize, usize),
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
}

/// Network size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    Grid { levels: u32 },
    Random { n: f64, r: f64 },
}

impl Geometry {
    pub fn node_count(&self) -> f64 {
        match *self {
            Geometry::Grid { levels } => {
                let l = levels as f64;
                2.0 * l * (l + 1.0)
            }
            Geometry::Random { n, .. } => n,
        }
    }

    fn grid_levels(&self, scenario: Scenario) -> Result<u32, CapacityError> {
        match *self {
            Geometry::Grid { levels } => Ok(levels),
            Geometry::Random { .. } => Err(CapacityError::GeometryMismatch {
                scenario,
                expected: "grid",
            }),
        }
    }

    fn random(&self, scenario: Scenario) -> Result<(f64, f64), CapacityError> {
        match *self {
            Geometry::Random { n, r } => Ok((n, r)),
            Geometry::Grid { .. } => Err(CapacityError::GeometryMismatch {
                scenario,
                expected: "random",
            }),
        }
    }
}

fn reciprocal(x: f64) -> f64 {
    if x <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / x
    }
}

fn check_alpha(alpha: &[f64], profiles: &OccupancyProfile) -> Result<(), CapacityError> {
    if alpha.len() != profiles.contents() {
        return Err(CapacityError::ContentCount(
            alpha.len(),
            profiles.contents(),
        ));
    }
    Ok(())
}

/// `N / sum_k alpha_k sum_i 4i sum_j (i-j) P_{i,j}^(k)`, i.e. the reciprocal
/// of the catalog-averaged level-wise hop count. `+inf` when every request
/// is served locally.
pub fn capacity_index_theorem1(
    topo: &GridTopology,
    profiles: &OccupancyProfile,
    alpha: &[f64],
) -> Result<f64, CapacityError> {
    check_alpha(alpha, profiles)?;
    let hops = (0..profiles.contents())
        .map(|k| hopcount::expected_hops_levelwise(topo, profiles, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reciprocal(hopcount::catalog_expected_hops(alpha, &hops)?))
}

/// Transport-capacity bound: `1/E[h]` on the grid, `1/(E[h] n r^2)` on the
/// random network.
pub fn interference_bound(
    scenario: Scenario,
    e_h: f64,
    n: f64,
    r: f64,
) -> Result<f64, CapacityError> {
    if !(e_h >= 0.0 && e_h.is_finite()) {
        return Err(CapacityError::Negative {
            name: "E[h]",
            value: e_h,
        });
    }
    Ok(match scenario {
        Scenario::GridPathwise | Scenario::GridRing => reciprocal(e_h),
        Scenario::RandomPathwise => reciprocal(e_h * n * r * r),
    })
}

/// Load on each server-adjacent link from one content at download rate
/// `gamma`.
///
/// Scenario I also accepts level-dependent occupancy, replacing
/// `(1-rho)^i` by `prod_{l=1..=i} (1 - rho_l)`; this is an extension of
/// the uniform formula.
pub fn server_link_load_content(
    scenario: Scenario,
    profiles: &OccupancyProfile,
    content: usize,
    gamma: f64,
    geometry: Geometry,
) -> Result<f64, CapacityError> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(CapacityError::Negative {
            name: "gamma",
            value: gamma,
        });
    }
    let uniform = profiles.uniform_value(content);
    let per_gamma = match scenario {
        Scenario::GridPathwise => {
            let levels = geometry.grid_levels(scenario)?;
            profiles
                .covers(levels)
                .map_err(|_| HopError::ProfileTooShort(levels))?;
            let mut miss = 1.0;
            let mut sum = 0.0;
            for i in 1..=levels as usize {
                miss *= 1.0 - profiles.rho(content, i);
                sum += i as f64 * miss;
            }
            sum
        }
        Scenario::GridRing => {
            let levels = geometry.grid_levels(scenario)?;
            let rho = uniform.ok_or(CapacityError::LevelwiseUnsupported(scenario))?;
            let q = 1.0 - rho;
            let ring: f64 = (1..=levels as usize)
                .map(|i| {
                    let fi = i as f64;
                    fi * q.powf(2.0 * fi * fi + 2.0 * fi + 1.0)
                })
                .sum();
            q + ring
        }
        Scenario::RandomPathwise => {
            let (n, r) = geometry.random(scenario)?;
            let rho = uniform.ok_or(CapacityError::LevelwiseUnsupported(scenario))?;
            let q = 1.0 - rho;
            let m = n * r * r;
            let rings = (1.0 / r + 1e-9).floor() as usize;
            let tail: f64 = (2..=rings).map(|i| i as f64 * q.powf(i as f64 * m)).sum();
            m * (q + tail)
        }
    };
    Ok(gamma * per_gamma)
}

/// `psi = sum_k alpha_k psi_k` at download rate `gamma`.
pub fn server_link_load(
    scenario: Scenario,
    alpha: &[f64],
    profiles: &OccupancyProfile,
    gamma: f64,
    geometry: Geometry,
) -> Result<f64, CapacityError> {
    check_alpha(alpha, profiles)?;
    let mut total = 0.0;
    for (k, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            total += a * server_link_load_content(scenario, profiles, k, gamma, geometry)?;
        }
    }
    Ok(total)
}

/// Largest rate the server links can carry: `1 / psi(1)`.
pub fn supportable_rate(
    scenario: Scenario,
    alpha: &[f64],
    profiles: &OccupancyProfile,
    geometry: Geometry,
) -> Result<f64, CapacityError> {
    server_link_load(scenario, alpha, profiles, 1.0, geometry).map(reciprocal)
}

/// Which bound sets the maximum download rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bottleneck {
    InterferenceLimited,
    ServerLimited,
    AllLocal,
}

impl Bottleneck {
    pub fn label(self) -> &'static str {
        match self {
            Bottleneck::InterferenceLimited => "interference-limited",
            Bottleneck::ServerLimited => "server-limited",
            Bottleneck::AllLocal => "all-local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub scenario: Scenario,
    pub expected_hops: f64,
    /// Reciprocal of the catalog hop count.
    pub capacity_index: f64,
    pub interference_bound: f64,
    /// `psi` at `gamma = 1`.
    pub server_link_load: f64,
    pub supportable_rate: f64,
    pub gamma_max: f64,
    pub regime: Bottleneck,
}

/// Catalog hop count used by the capacity analysis of each scenario.
pub fn scenario_expected_hops(
    scenario: Scenario,
    alpha: &[f64],
    profiles: &OccupancyProfile,
    geometry: Geometry,
) -> Result<f64, CapacityError> {
    check_alpha(alpha, profiles)?;
    let hops = match scenario {
        Scenario::GridPathwise => {
            let topo = GridTopology::new(geometry.grid_levels(scenario)?)?;
            (0..profiles.contents())
                .map(|k| hopcount::expected_hops_levelwise(&topo, profiles, k))
                .collect::<Result<Vec<_>, _>>()?
        }
        Scenario::GridRing => {
            let levels = geometry.grid_levels(scenario)?;
            (0..profiles.contents())
                .map(|k| {
                    let rho = profiles
                        .uniform_value(k)
                        .ok_or(CapacityError::LevelwiseUnsupported(scenario))?;
                    Ok(expected_hops_grid_ring(levels, rho, Normalization::Exact)?)
                })
                .collect::<Result<Vec<_>, CapacityError>>()?
        }
        Scenario::RandomPathwise => {
            let (n, r) = geometry.random(scenario)?;
            (0..profiles.contents())
                .map(|k| {
                    let rho = profiles
                        .uniform_value(k)
                        .ok_or(CapacityError::LevelwiseUnsupported(scenario))?;
                    Ok(expected_hops_random_pathwise(n, r, rho)?)
                })
                .collect::<Result<Vec<_>, CapacityError>>()?
        }
    };
    Ok(hopcount::catalog_expected_hops(alpha, &hops)?)
}

/// `gamma_max = min(interference bound, supportable rate)`.
pub fn throughput_capacity(
    scenario: Scenario,
    alpha: &[f64],
    profiles: &OccupancyProfile,
    geometry: Geometry,
) -> Result<CapacityReport, CapacityError> {
    let e_h = scenario_expected_hops(scenario, alpha, profiles, geometry)?;
    let (n, r) = match geometry {
        Geometry::Random { n, r } => (n, r),
        Geometry::Grid { .. } => (geometry.node_count(), 0.0),
    };
    let bound = interference_bound(scenario, e_h, n, r)?;
    let psi = server_link_load(scenario, alpha, profiles, 1.0, geometry)?;
    let supportable = reciprocal(psi);
    let gamma_max = bound.min(supportable);
    let regime = if gamma_max.is_infinite() {
        Bottleneck::AllLocal
    } else if supportable < bound {
        Bottleneck::ServerLimited
    } else {
        Bottleneck::InterferenceLimited
    };
    Ok(CapacityReport {
        scenario,
        expected_hops: e_h,
        capacity_index: reciprocal(e_h),
        interference_bound: bound,
        server_link_load: psi,
        supportable_rate: supportable,
        gamma_max,
        regime,
    })
}

/// Predicted exponent of `gamma_max` in `n` for `rho ~ n^-a`, `r ~ n^-b`.
pub fn capacity_order(scenario: Scenario, rho_exponent: f64, r_exponent: f64) -> f64 {
    let a = rho_exponent;
    let b = r_exponent;
    match scenario {
        Scenario::GridPathwise => (-1.0f64).max(-2.0 * a),
        Scenario::GridRing => (-1.0f64).max(-a),
        Scenario::RandomPathwise => {
            let per_cell = 1.0 - 2.0 * b;
            (-1.0f64).max((-per_cell).min(-2.0 * a + per_cell))
        }
    }
}

/// Exponent of the interference bound as the lemma statement composes it.
/// Reported next to the proof-based bound, which can differ for random
/// networks.
pub fn interference_order_statement(scenario: Scenario, rho_exponent: f64, r_exponent: f64) -> f64 {
    let a = rho_exponent;
    let b = r_exponent;
    match scenario {
        Scenario::GridPathwise => (-0.5f64).max(-a),
        Scenario::GridRing => (-0.5f64).max(-a / 2.0),
        Scenario::RandomPathwise => (-(1.0 - 2.0 * b)).min((-(1.0 - b)).max(-a)),
    }
}

/// `n (1 - rho) lambda`.
pub fn total_request_rate(n: f64, rho: f64, lambda: f64) -> f64 {
    n * (1.0 - rho) * lambda
}

/// `B lambda n (1 - rho) E[h]`.
pub fn total_traffic(n: f64, rho: f64, lambda: f64, size: f64, e_h: f64) -> f64 {
    size * total_request_rate(n, rho, lambda) * e_h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentTraffic {
    pub total_request_rate: f64,
    pub total_traffic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub per_content: Vec<ContentTraffic>,
    pub total_request_rate: f64,
    pub total_traffic: f64,
}

/// Per-content and aggregate traffic from slices indexed by content.
pub fn traffic_report(
    n: f64,
    rho: &[f64],
    lambda: &[f64],
    sizes: &[f64],
    hops: &[f64],
) -> Result<TrafficReport, CapacityError> {
    let m = rho.len();
    for len in [lambda.len(), sizes.len(), hops.len()] {
        if len != m {
            return Err(CapacityError::ContentCount(len, m));
        }
    }
    let per_content: Vec<ContentTraffic> = (0..m)
        .map(|k| ContentTraffic {
            total_request_rate: total_request_rate(n, rho[k], lambda[k]),
            total_traffic: total_traffic(n, rho[k], lambda[k], sizes[k], hops[k]),
        })
        .collect();
    Ok(TrafficReport {
        total_request_rate: per_content.iter().map(|c| c.total_request_rate).sum(),
        total_traffic: per_content.iter().map(|c| c.total_traffic).sum(),
        per_content,
    })
}
