//! Log-log slope fits of analytic metrics against predicted growth orders.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{self, capacity_order, CapacityError, Geometry};
use crate::content::OccupancyProfile;
use crate::hopcount::{self, latency_regime, Scenario};
use crate::topology::{connectivity_threshold, CellLattice, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("point {index} is not positive: ({x}, {y})")]
    NonPositive { index: usize, x: f64, y: f64 },
    #[error("sizes must be strictly increasing")]
    UnsortedSizes,
    #[error("scenario {0} needs {1} sizes")]
    SizeKind(Scenario, &'static str),
    #[error("all sizes coincide")]
    DegenerateSizes,
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Least squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LineFit, ScalingError> {
    if points.len() < 2 {
        return Err(ScalingError::TooFewPoints {
            min: 2,
            got: points.len(),
        });
    }
    for (index, &(x, y)) in points.iter().enumerate() {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(ScalingError::NonPositive { index, x, y });
        }
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(ScalingError::DegenerateSizes);
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * n * my.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    ExpectedHops,
    GammaMax,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::ExpectedHops => "E_h",
            Metric::GammaMax => "gamma_max",
        }
    }
}

/// Occupancy as a function of the node count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum RhoLaw {
    Constant {
        rho: f64,
    },
    /// `min(1, coefficient * n^-exponent)`.
    Power {
        coefficient: f64,
        exponent: f64,
    },
}

impl RhoLaw {
    pub fn at(&self, n: f64) -> f64 {
        match *self {
            RhoLaw::Constant { rho } => rho,
            RhoLaw::Power {
                coefficient,
                exponent,
            } => (coefficient * n.powf(-exponent)).min(1.0),
        }
    }

    /// The `a` in `rho ~ n^-a`; no caching is an infinitely fast decay.
    pub fn exponent(&self) -> f64 {
        match *self {
            RhoLaw::Constant { rho } if rho <= 0.0 => f64::INFINITY,
            RhoLaw::Constant { .. } => 0.0,
            RhoLaw::Power { exponent, .. } => exponent,
        }
    }
}

/// Cell side of the random network as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum RangeLaw {
    /// `coefficient * sqrt(ln n / n)`.
    Connectivity { coefficient: f64 },
    /// `coefficient * n^-exponent`.
    Power { coefficient: f64, exponent: f64 },
}

impl Default for RangeLaw {
    fn default() -> Self {
        RangeLaw::Connectivity { coefficient: 1.0 }
    }
}

impl RangeLaw {
    pub fn at(&self, n: f64) -> f64 {
        match *self {
            RangeLaw::Connectivity { coefficient } => {
                connectivity_threshold(n as usize, coefficient)
            }
            RangeLaw::Power {
                coefficient,
                exponent,
            } => coefficient * n.powf(-exponent),
        }
        .min(1.0)
    }
}

/// Network sizes to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeGrid {
    Levels(Vec<u32>),
    Nodes(Vec<usize>),
}

impl SizeGrid {
    pub fn default_levels() -> Self {
        SizeGrid::Levels(vec![10, 20, 40, 80, 160, 320])
    }

    pub fn default_nodes() -> Self {
        SizeGrid::Nodes(vec![
            1_000, 3_162, 10_000, 31_623, 100_000, 316_228, 1_000_000,
        ])
    }

    pub fn default_for(scenario: Scenario) -> Self {
        match scenario {
            Scenario::RandomPathwise => Self::default_nodes(),
            _ => Self::default_levels(),
        }
    }

    fn len(&self) -> usize {
        match self {
            SizeGrid::Levels(v) => v.len(),
            SizeGrid::Nodes(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    /// Node count.
    pub n: f64,
    pub rho: f64,
    /// Cell side, random networks only.
    pub r: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingVerdict {
    pub metric: Metric,
    pub scenario: Scenario,
    pub rho_law: RhoLaw,
    pub points: Vec<ScalingPoint>,
    pub fit: LineFit,
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Occupancy crosses a regime threshold inside the size grid.
    pub straddles: bool,
    pub regime: String,
}

const MIN_SIZES: usize = 4;

/// Order expression of the random-network regimes at one size.
fn random_order(metric: Metric, n: f64, r: f64, rho: f64) -> f64 {
    let cell = n * r * r;
    match metric {
        Metric::ExpectedHops => {
            if rho <= 1.0 / (n * r) {
                1.0 / r
            } else if rho <= 1.0 / cell {
                1.0 / (rho * cell)
            } else {
                1.0
            }
        }
        Metric::GammaMax => (1.0 / n).max((1.0 / cell).min(rho * rho * cell)),
    }
}

/// Signed distance of `rho` from the regime thresholds, one per threshold.
fn threshold_sides(scenario: Scenario, n: f64, r: f64, rho: f64) -> Vec<f64> {
    let side = |threshold: f64| (rho / threshold).ln();
    match scenario {
        Scenario::GridPathwise => vec![side(n.powf(-0.5))],
        Scenario::GridRing => vec![side(1.0 / n)],
        Scenario::RandomPathwise => vec![side(1.0 / (n * r)), side(1.0 / (n * r * r))],
    }
}

const SIDE_TIE: f64 = 1e-9;

/// Evaluate `metric` over the size grid, fit its slope in `n` and compare
/// with the predicted exponent.
///
/// Grid scenarios predict from the exponent tables. Random networks with a
/// log-corrected range have no pure power law, so the prediction is the
/// fitted slope of the regime's order expression over the same sizes.
pub fn verify_order(
    metric: Metric,
    scenario: Scenario,
    rho_law: RhoLaw,
    range_law: RangeLaw,
    sizes: &SizeGrid,
    tolerance: f64,
) -> Result<ScalingVerdict, ScalingError> {
    if sizes.len() < MIN_SIZES {
        return Err(ScalingError::TooFewPoints {
            min: MIN_SIZES,
            got: sizes.len(),
        });
    }
    let geometries: Vec<(Geometry, Option<f64>)> = match (scenario, sizes) {
        (Scenario::RandomPathwise, SizeGrid::Nodes(ns)) => ns
            .iter()
            .map(|&n| {
                let r = range_law.at(n as f64);
                (Geometry::Random { n: n as f64, r }, Some(r))
            })
            .collect(),
        (Scenario::RandomPathwise, SizeGrid::Levels(_)) => {
            return Err(ScalingError::SizeKind(scenario, "node-count"))
        }
        (_, SizeGrid::Levels(ls)) => ls
            .iter()
            .map(|&levels| (Geometry::Grid { levels }, None))
            .collect(),
        (_, SizeGrid::Nodes(_)) => return Err(ScalingError::SizeKind(scenario, "level")),
    };
    let ns: Vec<f64> = geometries.iter().map(|g| g.0.node_count()).collect();
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScalingError::UnsortedSizes);
    }

    let mut points = Vec::with_capacity(ns.len());
    let mut sides: Vec<Vec<f64>> = Vec::new();
    for (&(geometry, r), &n) in geometries.iter().zip(&ns) {
        let rho = rho_law.at(n);
        let profile =
            OccupancyProfile::uniform(vec![rho]).map_err(|_| CapacityError::Negative {
                name: "rho",
                value: rho,
            })?;
        let value = match (metric, geometry) {
            (Metric::ExpectedHops, Geometry::Random { n, r }) => {
                let lattice = CellLattice::fluid(n as usize, r)?;
                hopcount::expected_hops_random_cells(&lattice, rho).map_err(CapacityError::from)?
            }
            (Metric::ExpectedHops, _) => {
                capacity::scenario_expected_hops(scenario, &[1.0], &profile, geometry)?
            }
            (Metric::GammaMax, _) => {
                capacity::throughput_capacity(scenario, &[1.0], &profile, geometry)?.gamma_max
            }
        };
        sides.push(threshold_sides(scenario, n, r.unwrap_or(0.0), rho));
        points.push(ScalingPoint { n, rho, r, value });
    }
    let fit = fit_loglog_slope(&points.iter().map(|p| (p.n, p.value)).collect::<Vec<_>>())?;

    let straddles = (0..sides[0].len()).any(|t| {
        let above = sides.iter().any(|s| s[t] > SIDE_TIE);
        let below = sides.iter().any(|s| s[t] < -SIDE_TIE);
        above && below
    });

    let a = rho_law.exponent();
    let (predicted, regime) = match scenario {
        Scenario::RandomPathwise => {
            let order: Vec<(f64, f64)> = points
                .iter()
                .map(|p| (p.n, random_order(metric, p.n, p.r.unwrap_or(1.0), p.rho)))
                .collect();
            let b = match range_law {
                RangeLaw::Power { exponent, .. } => exponent,
                RangeLaw::Connectivity { .. } => 0.5,
            };
            let label = latency_regime(scenario, a, b).regime.label().to_string();
            (fit_loglog_slope(&order)?.slope, label)
        }
        _ => {
            let verdict = latency_regime(scenario, a, 0.0);
            let predicted = match metric {
                Metric::ExpectedHops => verdict.exponent,
                Metric::GammaMax => capacity_order(scenario, a, 0.0),
            };
            (predicted, verdict.regime.label().to_string())
        }
    };
    let pass = (fit.slope - predicted).abs() <= tolerance;
    Ok(ScalingVerdict {
        metric,
        scenario,
        rho_law,
        points,
        fit,
        predicted,
        tolerance,
        pass,
        straddles,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decades() -> Vec<f64> {
        (2..=6).map(|e| 10f64.powi(e)).collect()
    }

    #[test]
    fn fit_examples() {
        let sqrt: Vec<_> = decades().into_iter().map(|n| (n, n.sqrt())).collect();
        let f = fit_loglog_slope(&sqrt).unwrap();
        assert_relative_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let flat: Vec<_> = decades().into_iter().map(|n| (n, 7.0)).collect();
        let f = fit_loglog_slope(&flat).unwrap();
        assert_relative_eq!(f.slope, 0.0, epsilon = 1e-12);
        assert_eq!(f.r_squared, 1.0);
        let inv: Vec<_> = decades().into_iter().map(|n| (n, 3.0 / n)).collect();
        let f = fit_loglog_slope(&inv).unwrap();
        assert_relative_eq!(f.slope, -1.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-10);
        assert!(matches!(
            fit_loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]),
            Err(ScalingError::NonPositive { index: 0, .. })
        ));
        assert!(fit_loglog_slope(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn constant_occupancy_gives_flat_latency_and_capacity() {
        let law = RhoLaw::Constant { rho: 0.875 };
        let sizes = SizeGrid::default_levels();
        for metric in [Metric::ExpectedHops, Metric::GammaMax] {
            let v = verify_order(
                metric,
                Scenario::GridPathwise,
                law,
                RangeLaw::default(),
                &sizes,
                0.05,
            )
            .unwrap();
            assert_eq!(v.predicted, 0.0);
            assert!(v.pass, "{metric:?} slope {}", v.fit.slope);
            assert!(!v.straddles);
        }
    }

    #[test]
    fn inverse_size_occupancy_gives_square_root_latency() {
        let law = RhoLaw::Power {
            coefficient: 1.0,
            exponent: 1.0,
        };
        let v = verify_order(
            Metric::ExpectedHops,
            Scenario::GridPathwise,
            law,
            RangeLaw::default(),
            &SizeGrid::default_levels(),
            0.1,
        )
        .unwrap();
        assert_eq!(v.predicted, 0.5);
        assert!(v.pass, "slope {}", v.fit.slope);
    }

    #[test]
    fn no_cache_capacity_is_inverse_size() {
        let v = verify_order(
            Metric::GammaMax,
            Scenario::GridPathwise,
            RhoLaw::Constant { rho: 0.0 },
            RangeLaw::default(),
            &SizeGrid::default_levels(),
            0.05,
        )
        .unwrap();
        assert_eq!(v.predicted, -1.0);
        assert!(v.pass, "slope {}", v.fit.slope);
    }

    #[test]
    fn straddling_occupancy_is_flagged() {
        // 5 n^-0.7 crosses 1/sqrt(n) inside the grid; n^-0.3 stays above.
        let sizes = SizeGrid::default_levels();
        let cross = RhoLaw::Power {
            coefficient: 5.0,
            exponent: 0.7,
        };
        let v = verify_order(
            Metric::ExpectedHops,
            Scenario::GridPathwise,
            cross,
            RangeLaw::default(),
            &sizes,
            0.1,
        )
        .unwrap();
        assert!(v.straddles);
        let clear = RhoLaw::Power {
            coefficient: 1.0,
            exponent: 0.3,
        };
        let v = verify_order(
            Metric::ExpectedHops,
            Scenario::GridPathwise,
            clear,
            RangeLaw::default(),
            &sizes,
            0.1,
        )
        .unwrap();
        assert!(!v.straddles);
    }

    #[test]
    fn random_network_constant_occupancy_is_order_one() {
        let v = verify_order(
            Metric::ExpectedHops,
            Scenario::RandomPathwise,
            RhoLaw::Constant { rho: 0.875 },
            RangeLaw::default(),
            &SizeGrid::Nodes(vec![1_000, 10_000, 100_000, 1_000_000]),
            0.05,
        )
        .unwrap();
        assert_eq!(v.predicted, 0.0);
        assert!(v.pass, "slope {}", v.fit.slope);
    }

    #[test]
    fn size_checks() {
        let law = RhoLaw::Constant { rho: 0.5 };
        assert!(matches!(
            verify_order(
                Metric::ExpectedHops,
                Scenario::GridPathwise,
                law,
                RangeLaw::default(),
                &SizeGrid::Levels(vec![1, 2, 3]),
                0.1
            ),
            Err(ScalingError::TooFewPoints { .. })
        ));
        assert!(matches!(
            verify_order(
                Metric::ExpectedHops,
                Scenario::GridPathwise,
                law,
                RangeLaw::default(),
                &SizeGrid::Levels(vec![4, 3, 2, 1]),
                0.1
            ),
            Err(ScalingError::UnsortedSizes)
        ));
        assert!(verify_order(
            Metric::ExpectedHops,
            Scenario::RandomPathwise,
            law,
            RangeLaw::default(),
            &SizeGrid::default_levels(),
            0.1
        )
        .is_err());
    }

    #[test]
    fn verdicts_are_deterministic() {
        let run = || {
            verify_order(
                Metric::GammaMax,
                Scenario::GridRing,
                RhoLaw::Power {
                    coefficient: 1.0,
                    exponent: 0.5,
                },
                RangeLaw::default(),
                &SizeGrid::default_levels(),
                0.05,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
