//! Built-in experiment configs for the three reference figures.

use icn_lab::content::{ContentCatalog, TtlLaw};
use icn_lab::hopcount::Scenario;
use icn_lab::scaling::{RangeLaw, SizeGrid};

use crate::config::{
    AnalyzeConfig, Axis, Evaluate, ExperimentConfig, LogRange, OccupancySource, SweepConfig,
    SweepParameter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Traffic and request rate against the request rate, unit timeout rate.
    Fig3,
    /// Traffic and request rate against the mean lifetime, unit request rate.
    Fig4,
    /// Maximum download rate against network size at occupancy 7/8.
    Fig5,
}

const DECADES: LogRange = LogRange {
    from: 1e-2,
    to: 1e2,
    points: 41,
};

fn unit_catalog() -> ContentCatalog {
    ContentCatalog::single(1.0, 1.0, TtlLaw::Exponential { rate: 1.0 }).expect("valid catalog")
}

fn edge_sweep(name: &str, parameter: SweepParameter) -> ExperimentConfig {
    ExperimentConfig {
        experiment: name.to_string(),
        catalog: unit_catalog(),
        analyze: AnalyzeConfig {
            scenarios: vec![Scenario::GridPathwise],
            levels: vec![16],
            occupancy: OccupancySource::Edge,
            ..AnalyzeConfig::default()
        },
        sweep: Some(SweepConfig {
            axes: vec![Axis {
                parameter,
                values: Vec::new(),
                log_range: Some(DECADES),
            }],
            evaluate: Evaluate::Analytic,
        }),
        ..ExperimentConfig::default()
    }
}

pub fn preset(which: Preset) -> ExperimentConfig {
    match which {
        Preset::Fig3 => edge_sweep("fig3", SweepParameter::RequestRate),
        Preset::Fig4 => edge_sweep("fig4", SweepParameter::TimeoutMean),
        Preset::Fig5 => {
            let levels = match SizeGrid::default_levels() {
                SizeGrid::Levels(v) => v,
                SizeGrid::Nodes(_) => unreachable!(),
            };
            let nodes = match SizeGrid::default_nodes() {
                SizeGrid::Nodes(v) => v,
                SizeGrid::Levels(_) => unreachable!(),
            };
            ExperimentConfig {
                experiment: "fig5".to_string(),
                catalog: unit_catalog(),
                analyze: AnalyzeConfig {
                    scenarios: Scenario::ALL.to_vec(),
                    levels,
                    nodes,
                    range: RangeLaw::Connectivity { coefficient: 1.0 },
                    occupancy: OccupancySource::Uniform { rho: vec![0.875] },
                    no_cache_baseline: true,
                },
                ..ExperimentConfig::default()
            }
        }
    }
}
