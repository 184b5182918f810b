//! Experiment runner: analytic reports, simulations, parameter sweeps and
//! scaling checks, written as CSV or JSON tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod rows;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use icn_lab::simulator::TraceRecord;

pub use config::{parse_config, ExperimentConfig, Format};
pub use error::CliError;
pub use output::Report;
pub use presets::{preset, Preset};
pub use rows::{ReportRow, Rows, ScalingRow, Source};

/// Environment variable giving the worker count when neither the flag nor
/// the config sets one.
pub const WORKERS_ENV: &str = "ICNLAB_WORKERS";

/// Service records kept per replica when `--trace` is given without a
/// configured limit.
pub const DEFAULT_TRACE_LIMIT: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "icnlab",
    version,
    about = "Latency and throughput of TTL cache networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for replicas and sweep points.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Built-in config, used instead of --config.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Write simulated service records to this CSV file.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Analytic hop counts, capacity bounds and traffic.
    Analyze,
    /// Monte Carlo or event-driven simulation.
    Simulate,
    /// Analyze or simulate over one or two parameter axes.
    Sweep,
    /// Fit growth exponents across network sizes.
    Scaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Scaling => "scaling",
        }
    }
}

/// A finished command, not yet written.
#[derive(Debug)]
pub struct Execution {
    pub report: Report,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub trace: Vec<TraceRecord>,
    pub wall_clock: Duration,
}

fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Config from the preset or file, with flags applied and validated.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&cli.config, cli.preset) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "preset",
                "cannot be combined with --config",
            ))
        }
        (Some(path), None) => read_config(path)?,
        (None, Some(p)) => preset(p),
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = Some(workers);
    }
    if let Some(format) = cli.format {
        config.format = format;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

/// Flag, then config, then the environment, then one.
pub fn resolve_workers(config: &ExperimentConfig) -> Result<usize, CliError> {
    if let Some(w) = config.workers {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(CliError::config(
                WORKERS_ENV,
                format!("expected a positive integer, got {v:?}"),
            )),
        },
        Err(_) => Ok(1),
    }
}

/// Runs `command` on a pool of `workers` threads.
pub fn execute(
    command: Command,
    config: &ExperimentConfig,
    workers: usize,
    trace: bool,
) -> Result<Execution, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config("workers", e.to_string()))?;
    let start = Instant::now();
    let mut records = Vec::new();
    let rows = pool.install(|| -> Result<Rows, CliError> {
        Ok(match command {
            Command::Analyze => Rows::Report(commands::analyze(config)),
            Command::Simulate => {
                let outcome = commands::simulate(config, trace.then_some(DEFAULT_TRACE_LIMIT))?;
                records = outcome.result.trace.clone();
                Rows::Report(outcome.rows)
            }
            Command::Sweep => Rows::Report(commands::sweep(config)?),
            Command::Scaling => Rows::Scaling(commands::scaling(config)),
        })
    })?;
    Ok(Execution {
        report: Report::new(command.name(), &config.experiment, config.seed, rows),
        format: config.format,
        out: config.out.clone(),
        trace: records,
        wall_clock: start.elapsed(),
    })
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Execution, CliError> {
    let config = load_config(cli)?;
    let workers = resolve_workers(&config)?;
    let execution = execute(cli.command, &config, workers, cli.trace.is_some())?;
    write_bytes(
        execution.out.as_deref(),
        &execution.report.encode(execution.format)?,
    )?;
    if let Some(path) = &cli.trace {
        let file = std::fs::File::create(path)?;
        output::write_trace(&execution.trace, std::io::BufWriter::new(file))?;
    }
    Ok(execution)
}

/// Parses arguments, runs and writes; returns the exit status: 0 on
/// success, 1 when error rows were emitted, 2 for bad input, 3 when
/// output failed.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(execution) => {
            let meta = &execution.report.meta;
            eprintln!(
                "{}: {} rows, {} errors, {:.3}s",
                meta.command,
                meta.rows,
                meta.errors,
                execution.wall_clock.as_secs_f64()
            );
            if execution.report.has_errors() {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
