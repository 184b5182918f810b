//! Serving probabilities and expected hop counts.
//!
//! Grid sums are normalized by the true requester count `N = 2L(L+1)` and
//! keep the ring weight `4i`, so the level-wise sum and the closed uniform
//! forms agree exactly. [`Normalization::WithoutRingFactor`] drops the constant 4.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::OccupancyProfile;
use crate::topology::{CellLattice, GridPoint, GridTopology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopError {
    #[error("serving level {serving} is above requester level {requester}")]
    LevelOrder { requester: usize, serving: usize },
    #[error("{what}: {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("profile is too short for a grid of {0} levels")]
    ProfileTooShort(u32),
    #[error("{0} must lie in [0, 1]")]
    NotAProbability(&'static str),
}

/// Network model and discovery scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Grid, search along the shortest path to the server.
    #[serde(rename = "I")]
    GridPathwise,
    /// Grid, expanding-ring search for the nearest copy.
    #[serde(rename = "II")]
    GridRing,
    /// Random cell network, path-wise search.
    #[serde(rename = "III")]
    RandomPathwise,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::GridPathwise,
        Scenario::GridRing,
        Scenario::RandomPathwise,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::GridPathwise => "I",
            Scenario::GridRing => "II",
            Scenario::RandomPathwise => "III",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" | "1" => Ok(Scenario::GridPathwise),
            "II" | "2" => Ok(Scenario::GridRing),
            "III" | "3" => Ok(Scenario::RandomPathwise),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Keep the `4i` ring weight; matches the level-wise sum.
    #[default]
    Exact,
    /// Drop the constant 4, as in the asymptotic statements.
    WithoutRingFactor,
}

impl Normalization {
    fn factor(self) -> f64 {
        match self {
            Normalization::Exact => 4.0,
            Normalization::WithoutRingFactor => 1.0,
        }
    }
}

fn grid_nodes(levels: u32) -> f64 {
    let l = levels as f64;
    2.0 * l * (l + 1.0)
}

/// Probability that a level-`i` request for `content` is served at level
/// `j`: `rho_j * prod_{l=j+1..=i} (1 - rho_l)`.
pub fn serve_probability(
    profile: &OccupancyProfile,
    content: usize,
    i: usize,
    j: usize,
) -> Result<f64, HopError> {
    if j > i {
        return Err(HopError::LevelOrder {
            requester: i,
            serving: j,
        });
    }
    let miss: f64 = (j + 1..=i).map(|l| 1.0 - profile.rho(content, l)).product();
    Ok(profile.rho(content, j) * miss)
}

/// Serving-level distribution per requester level for one content.
#[derive(Debug, Clone, PartialEq)]
pub struct HopDistribution {
    /// `rows[i][j]` for `0 <= j <= i <= L`.
    pub rows: Vec<Vec<f64>>,
    pub expected_hops: f64,
}

pub fn hop_distribution(
    topo: &GridTopology,
    profile: &OccupancyProfile,
    content: usize,
) -> Result<HopDistribution, HopError> {
    profile
        .covers(topo.levels())
        .map_err(|_| HopError::ProfileTooShort(topo.levels()))?;
    let l = topo.levels() as usize;
    let mut rows = Vec::with_capacity(l + 1);
    let mut weighted = 0.0;
    for i in 0..=l {
        let mut row = vec![0.0; i + 1];
        let mut survive = 1.0;
        for j in (0..=i).rev() {
            let rho = profile.rho(content, j);
            row[j] = rho * survive;
            survive *= 1.0 - rho;
        }
        if i > 0 {
            let hops: f64 = (0..i).map(|j| (i - j) as f64 * row[j]).sum();
            weighted += topo.nodes_at_level(i as u32) as f64 * hops;
        }
        rows.push(row);
    }
    Ok(HopDistribution {
        rows,
        expected_hops: weighted / topo.node_count() as f64,
    })
}

/// Level-wise expected hops for path-wise discovery on the grid:
/// `(1/N) sum_i 4i sum_{j<i} (i-j) P_{i,j}`.
pub fn expected_hops_levelwise(
    topo: &GridTopology,
    profile: &OccupancyProfile,
    content: usize,
) -> Result<f64, HopError> {
    hop_distribution(topo, profile, content).map(|d| d.expected_hops)
}

fn check_rho(rho: f64) -> Result<(), HopError> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(HopError::NotAProbability("rho"))
    }
}

/// Path-wise expected hops with uniform occupancy:
/// `c/N [sum_i i^2 q^i + rho sum_i i sum_{l<i} l q^l]`, `q = 1 - rho`.
pub fn expected_hops_grid_pathwise(
    levels: u32,
    rho: f64,
    norm: Normalization,
) -> Result<f64, HopError> {
    check_rho(rho)?;
    let q = 1.0 - rho;
    let mut server = 0.0;
    let mut cache = 0.0;
    // partial = sum_{l=1}^{i-1} l q^l
    let mut partial = 0.0;
    let mut q_pow = 1.0;
    for i in 1..=levels as usize {
        let fi = i as f64;
        q_pow *= q;
        server += fi * fi * q_pow;
        cache += fi * partial;
        partial += fi * q_pow;
    }
    Ok(norm.factor() * (server + rho * cache) / grid_nodes(levels))
}

/// Expanding-ring expected hops with uniform occupancy on an unclipped
/// lattice: a level-`i` requester reaches the server when all
/// `2i^2 - 2i + 1` caches within `i - 1` hops miss, and stops at ring `l`
/// when the `4l` caches there are not all empty.
pub fn expected_hops_grid_ring(
    levels: u32,
    rho: f64,
    norm: Normalization,
) -> Result<f64, HopError> {
    check_rho(rho)?;
    let q = 1.0 - rho;
    let ball = |l: f64| q.powf(2.0 * l * l - 2.0 * l + 1.0);
    let mut server = 0.0;
    let mut cache = 0.0;
    let mut partial = 0.0;
    for i in 1..=levels as usize {
        let fi = i as f64;
        server += fi * fi * ball(fi);
        cache += fi * partial;
        let l = fi;
        partial += l * ball(l) * (1.0 - q.powf(4.0 * l));
    }
    Ok(norm.factor() * (server + cache) / grid_nodes(levels))
}

/// Expanding-ring expected hops on the real, boundary-clipped grid, for any
/// level-wise profile. Uses `E[h] = sum_{l<i} P(no copy within l hops)`.
pub fn expected_hops_ring_clipped(
    topo: &GridTopology,
    profile: &OccupancyProfile,
    content: usize,
) -> Result<f64, HopError> {
    profile
        .covers(topo.levels())
        .map_err(|_| HopError::ProfileTooShort(topo.levels()))?;
    let log_miss: Vec<f64> = (0..=topo.levels() as usize)
        .map(|lvl| (1.0 - profile.rho(content, lvl)).ln())
        .collect();
    let mut ring = Vec::new();
    let mut total = 0.0;
    for node in topo.requesters() {
        let center = topo.point(node);
        let level = center.level();
        let mut log_survive = 0.0;
        let mut hops = 0.0;
        for radius in 0..level {
            topo.ring_at(center, radius, &mut ring);
            log_survive += ring
                .iter()
                .map(|&q| log_miss[topo.level_of(q) as usize])
                .sum::<f64>();
            let survive = log_survive.exp();
            if survive < 1e-300 {
                break;
            }
            hops += survive;
        }
        total += hops;
    }
    Ok(total / topo.node_count() as f64)
}

/// Uniform-occupancy convenience wrapper around [`expected_hops_ring_clipped`].
pub fn expected_hops_ring_clipped_uniform(topo: &GridTopology, rho: f64) -> Result<f64, HopError> {
    check_rho(rho)?;
    let q = 1.0 - rho;
    let mut total = 0.0;
    for node in topo.requesters() {
        let center: GridPoint = topo.point(node);
        let mut hops = 0.0;
        for radius in 0..center.level() {
            // The server is at distance `level`, never inside the ball.
            let caches = topo.ring_population(center, radius) as f64;
            let survive = q.powf(caches);
            if survive < 1e-300 {
                break;
            }
            hops += survive;
        }
        total += hops;
    }
    Ok(total / topo.node_count() as f64)
}

/// Random-network path-wise expected hops in the fluid approximation,
/// `r^2 { q + sum_{i=2}^{1/r} i^2 q^{i m} + (1 - q^m) sum_{i=2}^{1/r} i sum_{l<i} l q^{l m} }`
/// with `q = 1 - rho` and `m = n r^2`. The leading `r^2 q` level-1 term is
/// kept.
pub fn expected_hops_random_pathwise(n: f64, r: f64, rho: f64) -> Result<f64, HopError> {
    check_rho(rho)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(HopError::NotAProbability("r"));
    }
    let q = 1.0 - rho;
    let m = n * r * r;
    let rings = (1.0 / r + 1e-9).floor() as usize;
    let mut server = 0.0;
    let mut cache = 0.0;
    let mut partial = 0.0;
    for i in 2..=rings {
        let fi = i as f64;
        let prev = fi - 1.0;
        partial += prev * q.powf(prev * m);
        server += fi * fi * q.powf(fi * m);
        cache += fi * partial;
    }
    Ok(r * r * (q + server + (1.0 - q.powf(m)) * cache))
}

/// Exact expected hops of random-network path-wise discovery on a cell
/// lattice with independent caches of presence `rho`.
///
/// Semantics: the requester's own cache is 0 hops; one transmission reaches
/// its cell mates and every node of the next cell toward the server; each
/// further cell costs one hop; the server cell ends the search. A requester
/// inside the server cell is one hop from the server. Among the two closer
/// cells off the axes, one is picked uniformly.
pub fn expected_hops_random_cells(lattice: &CellLattice, rho: f64) -> Result<f64, HopError> {
    check_rho(rho)?;
    let q = 1.0 - rho;
    let cells = lattice.occupancy.len();
    let server = lattice.server_index();
    let mut order: Vec<usize> = (0..cells).collect();
    order.sort_by_key(|&c| lattice.distance_to_server(c));

    // relay[c]: expected remaining hops for a request held by a relay in
    // cell c whose own cell has been searched.
    let mut relay = vec![0.0f64; cells];
    let onward = |relay: &[f64], next: usize| -> f64 {
        if next == server {
            0.0
        } else {
            q.powf(lattice.occupancy[next]) * relay[next]
        }
    };
    for &c in &order {
        if c == server {
            continue;
        }
        relay[c] = 1.0
            + match lattice.descent_options(c) {
                (a, None) => onward(&relay, a),
                (a, Some(b)) => 0.5 * (onward(&relay, a) + onward(&relay, b)),
            };
    }

    let total_nodes: f64 = lattice.occupancy.iter().sum();
    let mut acc = 0.0;
    for (c, &m) in lattice.occupancy.iter().enumerate().take(cells) {
        if m <= 0.0 {
            continue;
        }
        let not_self = if c == server {
            1.0
        } else {
            1.0 + q.powf((m - 1.0).max(0.0)) * (relay[c] - 1.0)
        };
        acc += m * q * not_self;
    }
    Ok(acc / total_nodes)
}

/// `sum_k alpha_k E[h_k]`.
pub fn catalog_expected_hops(alpha: &[f64], hops: &[f64]) -> Result<f64, HopError> {
    if alpha.len() != hops.len() {
        return Err(HopError::LengthMismatch {
            what: "per-content hops",
            expected: alpha.len(),
            got: hops.len(),
        });
    }
    Ok(alpha
        .iter()
        .zip(hops)
        .filter(|(&a, _)| a > 0.0)
        .map(|(a, h)| a * h)
        .sum())
}

/// Asymptotic latency regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Most requests travel to the server.
    ServerDominated,
    /// The occupancy exponent sits exactly on the threshold.
    Boundary,
    /// Random networks only: copies are found a few cells away.
    Intermediate,
    /// Requests are served by nearby caches.
    CacheDominated,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::ServerDominated => "server-dominated",
            Regime::Boundary => "boundary",
            Regime::Intermediate => "intermediate",
            Regime::CacheDominated => "cache-dominated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    /// Predicted growth exponent of `E[h]` in the node count.
    pub exponent: f64,
}

const EXPONENT_TIE: f64 = 1e-12;

/// Classify `rho ~ n^-a` (and `r ~ n^-b` for random networks) and predict
/// the exponent of `E[h]` in `n`.
pub fn latency_regime(scenario: Scenario, rho_exponent: f64, r_exponent: f64) -> RegimeVerdict {
    let a = rho_exponent;
    let classify = |threshold: f64, server: f64, cache: f64| {
        if (a - threshold).abs() <= EXPONENT_TIE {
            RegimeVerdict {
                regime: Regime::Boundary,
                exponent: server,
            }
        } else if a > threshold {
            RegimeVerdict {
                regime: Regime::ServerDominated,
                exponent: server,
            }
        } else {
            RegimeVerdict {
                regime: Regime::CacheDominated,
                exponent: cache,
            }
        }
    };
    match scenario {
        Scenario::GridPathwise => classify(0.5, 0.5, a),
        Scenario::GridRing => classify(1.0, 0.5, a / 2.0),
        Scenario::RandomPathwise => {
            let b = r_exponent;
            let upper = 1.0 - b; // rho ~ 1/(n r)
            let lower = 1.0 - 2.0 * b; // rho ~ 1/(n r^2)
            if a >= upper - EXPONENT_TIE {
                RegimeVerdict {
                    regime: if (a - upper).abs() <= EXPONENT_TIE {
                        Regime::Boundary
                    } else {
                        Regime::ServerDominated
                    },
                    exponent: b,
                }
            } else if a > lower + EXPONENT_TIE {
                RegimeVerdict {
                    regime: Regime::Intermediate,
                    exponent: a - lower,
                }
            } else {
                RegimeVerdict {
                    regime: if (a - lower).abs() <= EXPONENT_TIE {
                        Regime::Boundary
                    } else {
                        Regime::CacheDominated
                    },
                    exponent: 0.0,
                }
            }
        }
    }
}
