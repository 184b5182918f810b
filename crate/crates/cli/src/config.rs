//! Experiment configuration: one JSON document, validated after parsing.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use icn_lab::content::{ContentCatalog, TtlLaw};
use icn_lab::hopcount::Scenario;
use icn_lab::scaling::{Metric, RangeLaw, RhoLaw, SizeGrid};
use icn_lab::simulator::{Caching, Discovery, NetworkSpec, MIN_BATCHES};
use icn_lab::topology::DescentRule;

use crate::error::CliError;

/// Largest number of sweep points evaluated in one run.
pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_catalog")]
    pub catalog: ContentCatalog,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

fn default_experiment() -> String {
    "experiment".to_string()
}

/// One unit-size item requested at rate one with unit exponential lifetime.
pub fn default_catalog() -> ContentCatalog {
    ContentCatalog::single(1.0, 1.0, TtlLaw::Exponential { rate: 1.0 })
        .expect("valid default catalog")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: default_experiment(),
            seed: 0,
            workers: None,
            format: Format::Csv,
            out: None,
            catalog: default_catalog(),
            analyze: AnalyzeConfig::default(),
            simulate: None,
            sweep: None,
            scaling: ScalingConfig::default(),
        }
    }
}

/// Where the analytic occupancy comes from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OccupancySource {
    /// Edge-only caching with each item's lifetime law.
    #[default]
    Edge,
    /// On-path caching with fixed lifetimes; grid only.
    OnPath,
    /// Given presence per item, or one value for every item.
    Uniform { rho: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub scenarios: Vec<Scenario>,
    /// Grid sizes for scenarios I and II.
    pub levels: Vec<u32>,
    /// Node counts for scenario III.
    pub nodes: Vec<usize>,
    pub range: RangeLaw,
    pub occupancy: OccupancySource,
    /// Also emit rows with empty caches.
    pub no_cache_baseline: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![Scenario::GridPathwise],
            levels: vec![16],
            nodes: vec![10_000],
            range: RangeLaw::default(),
            occupancy: OccupancySource::Edge,
            no_cache_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimOccupancy {
    Snapshot {
        #[serde(default)]
        profile: OccupancySource,
        samples: u64,
    },
    Ttl {
        horizon: f64,
        warmup: f64,
        #[serde(default)]
        max_events: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub network: NetworkSpec,
    #[serde(default)]
    pub discovery: Discovery,
    #[serde(default)]
    pub caching: Caching,
    pub occupancy: SimOccupancy,
    #[serde(default)]
    pub descent: DescentRule,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub trace_limit: usize,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
}

fn default_batches() -> usize {
    MIN_BATCHES
}

fn default_replicas() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Per-node request rate of every item.
    RequestRate,
    /// Exponential lifetime rate of every item.
    TimeoutRate,
    /// Mean exponential lifetime of every item.
    TimeoutMean,
    /// Uniform presence probability.
    Rho,
    /// Grid levels.
    Levels,
    /// Fixed lifetime of every item.
    TtlDuration,
    /// Random-network node count.
    RandomSize,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::RequestRate => "request_rate",
            SweepParameter::TimeoutRate => "timeout_rate",
            SweepParameter::TimeoutMean => "timeout_mean",
            SweepParameter::Rho => "rho",
            SweepParameter::Levels => "levels",
            SweepParameter::TtlDuration => "ttl_duration",
            SweepParameter::RandomSize => "random_size",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepParameter::Levels | SweepParameter::RandomSize)
    }
}

/// `points` values spaced geometrically from `from` to `to` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl LogRange {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.from];
        }
        let (a, b) = (self.from.ln(), self.to.ln());
        let step = (b - a) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| match i {
                0 => self.from,
                i if i == self.points - 1 => self.to,
                i => (a + step * i as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub log_range: Option<LogRange>,
}

impl Axis {
    pub fn grid(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        if let Some(r) = self.log_range {
            v.extend(r.values());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluate {
    #[default]
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub evaluate: Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingCheck {
    pub metric: Metric,
    pub scenario: Scenario,
    pub rho_law: RhoLaw,
    #[serde(default)]
    pub range: RangeLaw,
    /// Defaults to the scenario's standard size grid.
    #[serde(default)]
    pub sizes: Option<SizeGrid>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// The standard checks when empty.
    pub checks: Vec<ScalingCheck>,
}

impl ScalingConfig {
    pub fn standard_checks() -> Vec<ScalingCheck> {
        let check = |metric, scenario, rho_law, tolerance| ScalingCheck {
            metric,
            scenario,
            rho_law,
            range: RangeLaw::default(),
            sizes: None,
            tolerance,
        };
        let constant = RhoLaw::Constant { rho: 0.875 };
        vec![
            check(Metric::ExpectedHops, Scenario::GridPathwise, constant, 0.05),
            check(Metric::GammaMax, Scenario::GridPathwise, constant, 0.05),
            check(
                Metric::ExpectedHops,
                Scenario::GridPathwise,
                RhoLaw::Power {
                    coefficient: 1.0,
                    exponent: 1.0,
                },
                0.1,
            ),
            check(
                Metric::GammaMax,
                Scenario::GridPathwise,
                RhoLaw::Constant { rho: 0.0 },
                0.05,
            ),
            check(
                Metric::ExpectedHops,
                Scenario::RandomPathwise,
                constant,
                0.05,
            ),
        ]
    }

    pub fn checks_or_standard(&self) -> Vec<ScalingCheck> {
        if self.checks.is_empty() {
            Self::standard_checks()
        } else {
            self.checks.clone()
        }
    }
}

/// Parses a config document, naming the offending field on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })
}

fn is_probability(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl ExperimentConfig {
    /// Checks that cannot be expressed in the types.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == Some(0) {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        let a = &self.analyze;
        if a.scenarios.is_empty() {
            return Err(CliError::config("analyze.scenarios", "must not be empty"));
        }
        if let Some(i) = a.levels.iter().position(|&l| l == 0) {
            return Err(CliError::config(
                format!("analyze.levels[{i}]"),
                "must be at least 1",
            ));
        }
        if let Some(i) = a.nodes.iter().position(|&n| n < 2) {
            return Err(CliError::config(
                format!("analyze.nodes[{i}]"),
                "must be at least 2",
            ));
        }
        self.validate_source(&a.occupancy, "analyze.occupancy")?;
        if let Some(s) = &self.simulate {
            if s.replicas == 0 {
                return Err(CliError::config("simulate.replicas", "must be at least 1"));
            }
            if let SimOccupancy::Snapshot { profile, .. } = &s.occupancy {
                self.validate_source(profile, "simulate.occupancy.profile")?;
            }
        }
        if let Some(sw) = &self.sweep {
            self.validate_sweep(sw)?;
        }
        for (i, c) in self.scaling.checks.iter().enumerate() {
            if !(c.tolerance > 0.0 && c.tolerance.is_finite()) {
                return Err(CliError::config(
                    format!("scaling.checks[{i}].tolerance"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    fn validate_source(&self, source: &OccupancySource, path: &str) -> Result<(), CliError> {
        if let OccupancySource::Uniform { rho } = source {
            if rho.len() != 1 && rho.len() != self.catalog.len() {
                return Err(CliError::config(
                    format!("{path}.rho"),
                    format!(
                        "needs 1 or {} values, got {}",
                        self.catalog.len(),
                        rho.len()
                    ),
                ));
            }
            if let Some(i) = rho.iter().position(|&x| !is_probability(x)) {
                return Err(CliError::config(
                    format!("{path}.rho[{i}]"),
                    "must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    fn validate_sweep(&self, sweep: &SweepConfig) -> Result<(), CliError> {
        if sweep.axes.is_empty() || sweep.axes.len() > 2 {
            return Err(CliError::config(
                "sweep.axes",
                format!("needs one or two axes, got {}", sweep.axes.len()),
            ));
        }
        if sweep.axes.len() == 2 && sweep.axes[0].parameter == sweep.axes[1].parameter {
            return Err(CliError::config(
                "sweep.axes[1].parameter",
                "repeats the first axis",
            ));
        }
        if sweep.evaluate == Evaluate::Simulated && self.simulate.is_none() {
            return Err(CliError::config(
                "simulate",
                "simulated sweeps need a simulate section",
            ));
        }
        let mut points = 1usize;
        for (i, axis) in sweep.axes.iter().enumerate() {
            let path = format!("sweep.axes[{i}]");
            if let Some(r) = axis.log_range {
                if !(r.from > 0.0 && r.to > 0.0 && r.from.is_finite() && r.to.is_finite()) {
                    return Err(CliError::config(
                        format!("{path}.log_range"),
                        "bounds must be positive",
                    ));
                }
                if r.points == 0 {
                    return Err(CliError::config(
                        format!("{path}.log_range.points"),
                        "must be at least 1",
                    ));
                }
            }
            let grid = axis.grid();
            if grid.is_empty() {
                return Err(CliError::config(
                    format!("{path}.values"),
                    "axis grid is empty",
                ));
            }
            if let Some(j) = grid.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(CliError::config(
                    format!("{path}.values[{j}]"),
                    "must be finite and non-negative",
                ));
            }
            if axis.parameter.integral() {
                if let Some(j) = grid.iter().position(|x| x.fract() != 0.0 || *x < 1.0) {
                    return Err(CliError::config(
                        format!("{path}.values[{j}]"),
                        "must be a positive integer",
                    ));
                }
            }
            if axis.parameter == SweepParameter::Rho {
                if let Some(j) = grid.iter().position(|&x| !is_probability(x)) {
                    return Err(CliError::config(
                        format!("{path}.values[{j}]"),
                        "must lie in [0, 1]",
                    ));
                }
            }
            points = points.saturating_mul(grid.len());
        }
        if points > MAX_GRID_POINTS {
            return Err(CliError::config(
                "sweep.axes",
                format!("grid has {points} points, the limit is {MAX_GRID_POINTS}"),
            ));
        }
        Ok(())
    }
}
