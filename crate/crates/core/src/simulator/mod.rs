//! Monte Carlo simulation of request discovery and TTL cache dynamics.
//!
//! A run owns all of its state and is strictly sequential. Independent
//! replicas draw from separate streams of the same seed and can be merged
//! with [`Tally::merge`] in replica order.

mod discovery;
mod state;
mod stats;
mod trace;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{ContentCatalog, ContentError, OccupancyProfile, TtlLaw};
use crate::topology::{
    build_grid, build_random, CellLattice, DescentRule, GridTopology, RandomTopology, TopologyError,
};

pub use discovery::{
    discover_pathwise, discover_random, discover_ring, Discovery, Scratch, Service,
};
pub use state::{CacheView, PresenceFlags, SnapshotState, StaticCaches};
pub use stats::{ContentResult, Estimate, EventCounts, SimResult, Tally};
pub use trace::{hop_mismatches, recount_hops, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error("horizon {horizon} must exceed warmup {warmup} >= 0")]
    Horizon { horizon: f64, warmup: f64 },
    #[error("need at least {min} batches, got {got}")]
    TooFewBatches { min: usize, got: usize },
    #[error("{samples} samples cannot fill {batches} batches")]
    TooFewSamples { samples: u64, batches: usize },
    #[error("expanding-ring discovery is only defined on the grid")]
    RingOnRandom,
    #[error("random networks take uniform occupancy profiles only")]
    LevelwiseOnRandom,
    #[error("profile has {got} contents, catalog has {expected}")]
    ProfileContents { expected: usize, got: usize },
    #[error("this operation needs {0} mode")]
    WrongMode(&'static str),
    #[error("paired runs need a grid")]
    PairedNeedsGrid,
}

/// Topology to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSpec {
    Grid {
        levels: u32,
    },
    Random {
        n: usize,
        r: f64,
        /// Placement seed; derived from the run seed when absent.
        #[serde(default)]
        topology_seed: Option<u64>,
    },
}

/// Where downloaded copies are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Caching {
    /// Only the requester keeps a copy.
    #[default]
    EdgeOnly,
    /// Every node the request passed through keeps a copy.
    OnPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimMode {
    /// Independent cache draws from a given profile, one per sample.
    Snapshot {
        profile: OccupancyProfile,
        samples: u64,
    },
    /// Poisson requests and TTL expiries in continuous time.
    Ttl {
        horizon: f64,
        warmup: f64,
        #[serde(default = "default_max_events")]
        max_events: u64,
    },
}

fn default_max_events() -> u64 {
    1_000_000_000
}

fn default_batches() -> usize {
    MIN_BATCHES
}

pub const MIN_BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkSpec,
    pub catalog: ContentCatalog,
    #[serde(default)]
    pub discovery: Discovery,
    #[serde(default)]
    pub caching: Caching,
    pub occupancy: SimMode,
    #[serde(default)]
    pub descent: DescentRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Keep at most this many service records per replica.
    #[serde(default)]
    pub trace_limit: usize,
}

/// A built topology.
#[derive(Debug, Clone)]
pub enum Network {
    Grid(GridTopology),
    Random {
        topo: RandomTopology,
        lattice: CellLattice,
    },
}

impl Network {
    pub fn build(spec: &NetworkSpec, seed: u64) -> Result<Self, SimError> {
        Ok(match *spec {
            NetworkSpec::Grid { levels } => Network::Grid(build_grid(levels)?),
            NetworkSpec::Random {
                n,
                r,
                topology_seed,
            } => {
                let topo =
                    build_random(n, r, topology_seed.unwrap_or_else(|| placement_seed(seed)))?;
                let lattice = topo.occupancy_lattice();
                Network::Random { topo, lattice }
            }
        })
    }

    /// Number of node slots, server included on the grid.
    pub fn slots(&self) -> usize {
        match self {
            Network::Grid(g) => g.node_count() + 1,
            Network::Random { topo, .. } => topo.node_count(),
        }
    }

    pub fn requesters(&self) -> std::ops::Range<usize> {
        match self {
            Network::Grid(g) => g.requesters(),
            Network::Random { topo, .. } => 0..topo.node_count(),
        }
    }

    pub fn server_node(&self) -> Option<usize> {
        match self {
            Network::Grid(_) => Some(0),
            Network::Random { .. } => None,
        }
    }

    /// Level per slot: grid ring, or cell distance to the server cell.
    pub fn levels(&self) -> Vec<u32> {
        match self {
            Network::Grid(g) => (0..g.node_count() + 1).map(|v| g.level_of(v)).collect(),
            Network::Random { topo, .. } => {
                (0..topo.node_count()).map(|v| topo.level_of(v)).collect()
            }
        }
    }

    pub fn max_level(&self) -> u32 {
        match self {
            Network::Grid(g) => g.levels(),
            Network::Random { topo, .. } => topo.max_level(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn discover<V: CacheView, R: Rng + ?Sized>(
        &self,
        view: &mut V,
        requester: usize,
        content: usize,
        discovery: Discovery,
        rule: DescentRule,
        rng: &mut R,
        scratch: &mut Scratch,
    ) -> Service {
        match (self, discovery) {
            (Network::Grid(g), Discovery::Pathwise) => {
                discover_pathwise(g, view, requester, content, rule, rng, scratch)
            }
            (Network::Grid(g), Discovery::Ring) => {
                discover_ring(g, view, requester, content, rng, scratch)
            }
            (Network::Random { topo, lattice }, _) => {
                discover_random(topo, lattice, view, requester, content, rng, scratch)
            }
        }
    }
}

fn placement_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED_0F70_9010
}

/// Random stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// A validated configuration with its topology built once for all replicas.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: SimConfig,
    pub network: Network,
    levels: Vec<u32>,
    /// Caches per level (the server excluded).
    caches_at_level: Vec<usize>,
}

impl Prepared {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        if config.batches < MIN_BATCHES {
            return Err(SimError::TooFewBatches {
                min: MIN_BATCHES,
                got: config.batches,
            });
        }
        let network = Network::build(&config.network, config.seed)?;
        let random = matches!(network, Network::Random { .. });
        if random && config.discovery == Discovery::Ring {
            return Err(SimError::RingOnRandom);
        }
        match &config.occupancy {
            SimMode::Snapshot { profile, samples } => {
                if profile.contents() != config.catalog.len() {
                    return Err(SimError::ProfileContents {
                        expected: config.catalog.len(),
                        got: profile.contents(),
                    });
                }
                if random && !profile.is_uniform() {
                    return Err(SimError::LevelwiseOnRandom);
                }
                profile.covers(network.max_level())?;
                if *samples < config.batches as u64 {
                    return Err(SimError::TooFewSamples {
                        samples: *samples,
                        batches: config.batches,
                    });
                }
            }
            SimMode::Ttl {
                horizon, warmup, ..
            } => {
                if !(*warmup >= 0.0 && horizon > warmup && horizon.is_finite()) {
                    return Err(SimError::Horizon {
                        horizon: *horizon,
                        warmup: *warmup,
                    });
                }
            }
        }
        let levels = network.levels();
        let mut caches_at_level = vec![0; network.max_level() as usize + 1];
        for (v, &l) in levels.iter().enumerate() {
            if Some(v) != network.server_node() {
                caches_at_level[l as usize] += 1;
            }
        }
        Ok(Self {
            config,
            network,
            levels,
            caches_at_level,
        })
    }

    fn levels_plus_one(&self) -> usize {
        self.caches_at_level.len()
    }

    /// Run one replica on its own random stream.
    pub fn run_replica(&self, replica: u64) -> Tally {
        let mut rng = replica_rng(self.config.seed, replica);
        match &self.config.occupancy {
            SimMode::Snapshot { profile, samples } => {
                let mut out = self.snapshot(
                    profile,
                    *samples,
                    replica,
                    &[self.config.discovery],
                    &mut rng,
                );
                out.tallies.pop().expect("one discovery mode")
            }
            SimMode::Ttl {
                horizon,
                warmup,
                max_events,
            } => TtlEngine::new(self, *horizon, *warmup, *max_events, replica).run(&mut rng),
        }
    }

    /// Run `replicas` replicas in order and merge them.
    pub fn run(&self, replicas: u64) -> SimResult {
        let tallies = (0..replicas.max(1)).map(|i| self.run_replica(i)).collect();
        Tally::merge(tallies)
            .expect("at least one replica")
            .finish()
    }

    fn snapshot(
        &self,
        profile: &OccupancyProfile,
        samples: u64,
        replica: u64,
        modes: &[Discovery],
        rng: &mut ChaCha8Rng,
    ) -> SnapshotOutput {
        let cfg = &self.config;
        let m = cfg.catalog.len();
        let batches = cfg.batches;
        let mut tallies: Vec<Tally> = modes
            .iter()
            .map(|_| Tally::new(m, self.levels_plus_one(), batches))
            .collect();
        let mut state = SnapshotState::new(
            profile.clone(),
            self.levels.clone(),
            self.network.server_node(),
        );
        let alpha = WeightedIndex::new(cfg.catalog.popularities()).expect("validated popularities");
        let sizes: Vec<f64> = cfg.catalog.items().iter().map(|i| i.size).collect();
        let requesters = self.network.requesters();
        let nodes = requesters.len();
        let mut scratch = Scratch::new();
        let mut hops = vec![0u32; modes.len()];
        let mut violations = 0;
        let mut current_batch = 0;
        let flush = |state: &mut SnapshotState, tallies: &mut [Tally], batch: usize| {
            let (present, drawn) = state.take_draws();
            for t in tallies.iter_mut() {
                for k in 0..m {
                    for l in 0..self.levels_plus_one() {
                        let key = k * self.levels_plus_one() + l;
                        if drawn[key] > 0 {
                            t.add_presence(batch, k, l, present[key] as f64, drawn[key] as f64);
                        }
                    }
                }
            }
        };
        for s in 0..samples {
            let batch = (s as u128 * batches as u128 / samples as u128) as usize;
            if batch != current_batch {
                flush(&mut state, &mut tallies, current_batch);
                current_batch = batch;
            }
            state.new_snapshot();
            let node = requesters.start + rng.random_range(0..nodes);
            let k = alpha.sample(rng);
            for (i, &mode) in modes.iter().enumerate() {
                let service = self.network.discover(
                    &mut state,
                    node,
                    k,
                    mode,
                    cfg.descent,
                    rng,
                    &mut scratch,
                );
                hops[i] = service.hops;
                let t = &mut tallies[i];
                t.record(batch, k, &service, sizes[k]);
                t.add_exposure(batch, 1.0 / nodes as f64);
                t.events.requests += 1;
                t.events.recorded += 1;
                if t.trace.len() < cfg.trace_limit {
                    t.trace.push(TraceRecord {
                        replica,
                        time: s as f64,
                        requester: node,
                        content: k,
                        holder: service.holder,
                        serving_level: service.serving_level,
                        hops: service.hops,
                    });
                }
            }
            if modes.len() == 2 && hops[0] > hops[1] {
                violations += 1;
            }
        }
        flush(&mut state, &mut tallies, current_batch);
        SnapshotOutput {
            tallies,
            violations,
        }
    }
}

struct SnapshotOutput {
    tallies: Vec<Tally>,
    violations: u64,
}

/// Snapshot mode: mean hops over independent cache draws.
pub fn run_occupancy_snapshot(config: SimConfig) -> Result<SimResult, SimError> {
    if !matches!(config.occupancy, SimMode::Snapshot { .. }) {
        return Err(SimError::WrongMode("snapshot"));
    }
    Ok(Prepared::new(config)?.run(1))
}

/// TTL mode: event-driven requests, insertions and expiries.
pub fn run_ttl_simulation(config: SimConfig) -> Result<SimResult, SimError> {
    if !matches!(config.occupancy, SimMode::Ttl { .. }) {
        return Err(SimError::WrongMode("ttl"));
    }
    Ok(Prepared::new(config)?.run(1))
}

/// Either mode, single replica.
pub fn simulate(config: SimConfig) -> Result<SimResult, SimError> {
    Ok(Prepared::new(config)?.run(1))
}

/// Per-link server crossing rate of a run.
pub fn measure_server_load(result: &SimResult) -> Estimate {
    result.server_link_rate
}

/// Ring and path-wise discovery on the same snapshots and requesters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedResult {
    pub ring: SimResult,
    pub pathwise: SimResult,
    /// Samples where the ring search used more hops than the path.
    pub violations: u64,
}

pub fn run_paired_snapshot(config: SimConfig) -> Result<PairedResult, SimError> {
    let SimMode::Snapshot { profile, samples } = config.occupancy.clone() else {
        return Err(SimError::WrongMode("snapshot"));
    };
    if !matches!(config.network, NetworkSpec::Grid { .. }) {
        return Err(SimError::PairedNeedsGrid);
    }
    let prepared = Prepared::new(config)?;
    let mut rng = replica_rng(prepared.config.seed, 0);
    let mut out = prepared.snapshot(
        &profile,
        samples,
        0,
        &[Discovery::Ring, Discovery::Pathwise],
        &mut rng,
    );
    let pathwise = out.tallies.pop().expect("two modes").finish();
    let ring = out.tallies.pop().expect("two modes").finish();
    Ok(PairedResult {
        ring,
        pathwise,
        violations: out.violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Expiry {
    time: f64,
    seq: u64,
    slot: usize,
    generation: u32,
}

impl Eq for Expiry {}

impl Ord for Expiry {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Expiry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Lifetime {
    Exponential(Option<Exp<f64>>),
    Fixed { duration: f64, refresh: bool },
}

struct TtlEngine<'a> {
    prepared: &'a Prepared,
    warmup: f64,
    horizon: f64,
    max_events: u64,
    replica: u64,
    batch_width: f64,
    m: usize,
    flags: PresenceFlags,
    expiry: Vec<f64>,
    generation: Vec<u32>,
    since: Vec<f64>,
    available: Vec<f64>,
    absent: Vec<f64>,
    heap: BinaryHeap<Expiry>,
    seq: u64,
    lifetimes: Vec<Lifetime>,
    tally: Tally,
}

impl<'a> TtlEngine<'a> {
    fn new(
        prepared: &'a Prepared,
        horizon: f64,
        warmup: f64,
        max_events: u64,
        replica: u64,
    ) -> Self {
        let cfg = &prepared.config;
        let m = cfg.catalog.len();
        let slots = prepared.network.slots() * m;
        let lifetimes = cfg
            .catalog
            .items()
            .iter()
            .map(|item| match item.ttl {
                TtlLaw::Exponential { rate } => Lifetime::Exponential(
                    (rate > 0.0).then(|| Exp::new(rate).expect("validated rate")),
                ),
                TtlLaw::Fixed {
                    duration,
                    refresh_on_hit,
                } => Lifetime::Fixed {
                    duration,
                    refresh: refresh_on_hit,
                },
            })
            .collect();
        Self {
            prepared,
            warmup,
            horizon,
            max_events,
            replica,
            batch_width: (horizon - warmup) / cfg.batches as f64,
            m,
            flags: PresenceFlags {
                contents: m,
                present: vec![false; slots],
            },
            expiry: vec![f64::INFINITY; slots],
            generation: vec![0; slots],
            since: vec![0.0; slots],
            available: vec![0.0; slots],
            absent: vec![0.0; slots],
            heap: BinaryHeap::new(),
            seq: 0,
            lifetimes,
            tally: Tally::new(m, prepared.levels_plus_one(), cfg.batches),
        }
    }

    fn batch_of(&self, t: f64) -> usize {
        (((t - self.warmup) / self.batch_width) as usize).min(self.prepared.config.batches - 1)
    }

    /// Account the slot's state over `[since, now)` and move `since`.
    fn close(&mut self, slot: usize, now: f64) {
        let lo = self.since[slot].max(self.warmup);
        let hi = now;
        self.since[slot] = now;
        if hi <= lo {
            return;
        }
        if !self.flags.present[slot] {
            self.absent[slot] += hi - lo;
            return;
        }
        self.available[slot] += hi - lo;
        let node = slot / self.m;
        let k = slot % self.m;
        let level = self.prepared.levels[node] as usize;
        let mut b = self.batch_of(lo);
        let batches = self.prepared.config.batches;
        loop {
            let start = self.warmup + b as f64 * self.batch_width;
            let end = if b + 1 == batches {
                f64::INFINITY
            } else {
                start + self.batch_width
            };
            let overlap = hi.min(end) - lo.max(start);
            if overlap > 0.0 {
                self.tally.add_presence(b, k, level, overlap, 0.0);
            }
            if hi <= end || b + 1 == batches {
                break;
            }
            b += 1;
        }
    }

    fn insert<R: Rng + ?Sized>(&mut self, slot: usize, now: f64, rng: &mut R) {
        if self.flags.present[slot] {
            return;
        }
        self.close(slot, now);
        self.flags.present[slot] = true;
        self.generation[slot] = self.generation[slot].wrapping_add(1);
        self.tally.events.insertions += 1;
        let life = match &self.lifetimes[slot % self.m] {
            Lifetime::Exponential(Some(exp)) => exp.sample(rng),
            Lifetime::Exponential(None) => f64::INFINITY,
            Lifetime::Fixed { duration, .. } => *duration,
        };
        self.expiry[slot] = now + life;
        if self.expiry[slot].is_finite() {
            self.push(slot, self.expiry[slot]);
        }
    }

    fn push(&mut self, slot: usize, time: f64) {
        self.seq += 1;
        self.heap.push(Expiry {
            time,
            seq: self.seq,
            slot,
            generation: self.generation[slot],
        });
    }

    fn handle_expiry(&mut self, ev: Expiry) {
        if ev.generation != self.generation[ev.slot] || !self.flags.present[ev.slot] {
            return;
        }
        if self.expiry[ev.slot] > ev.time {
            // Refreshed since this event was queued.
            self.push(ev.slot, self.expiry[ev.slot]);
            return;
        }
        self.close(ev.slot, ev.time);
        self.flags.present[ev.slot] = false;
        self.generation[ev.slot] = self.generation[ev.slot].wrapping_add(1);
        self.tally.events.expiries += 1;
    }

    fn run(mut self, rng: &mut ChaCha8Rng) -> Tally {
        let prepared = self.prepared;
        let cfg = &prepared.config;
        let requesters = prepared.network.requesters();
        let nodes = requesters.len();
        let rates: Vec<f64> = cfg.catalog.items().iter().map(|i| i.request_rate).collect();
        let total_rate: f64 = nodes as f64 * rates.iter().sum::<f64>();
        let pick_content = WeightedIndex::new(&rates).ok();
        let arrivals = (total_rate > 0.0).then(|| Exp::new(total_rate).expect("positive rate"));
        let sizes: Vec<f64> = cfg.catalog.items().iter().map(|i| i.size).collect();
        let mut scratch = Scratch::new();

        let mut next_request = arrivals.as_ref().map_or(f64::INFINITY, |e| e.sample(rng));
        let mut events = 0u64;
        let mut end = self.horizon;
        loop {
            let next_expiry = self.heap.peek().map_or(f64::INFINITY, |e| e.time);
            let t = next_request.min(next_expiry);
            if t >= self.horizon {
                break;
            }
            if events >= self.max_events {
                self.tally.partial = true;
                end = t;
                break;
            }
            events += 1;
            if next_expiry <= next_request {
                let ev = self.heap.pop().expect("peeked");
                self.handle_expiry(ev);
                continue;
            }
            next_request += arrivals.as_ref().expect("requests need a rate").sample(rng);
            let node = requesters.start + rng.random_range(0..nodes);
            let k = pick_content.as_ref().expect("positive rates").sample(rng);
            self.tally.events.requests += 1;
            let service = prepared.network.discover(
                &mut self.flags,
                node,
                k,
                cfg.discovery,
                cfg.descent,
                rng,
                &mut scratch,
            );
            if let Lifetime::Fixed {
                duration,
                refresh: true,
            } = self.lifetimes[k]
            {
                // Under edge caching only the owner's requests touch its
                // timer; on-path caching refreshes whichever cache serves.
                let refreshes = match (service.holder, cfg.caching) {
                    (Some(h), Caching::OnPath) => Some(h),
                    (Some(h), Caching::EdgeOnly) if h == node => Some(h),
                    _ => None,
                };
                if let Some(h) = refreshes {
                    self.expiry[h * self.m + k] = t + duration;
                }
            }
            match cfg.caching {
                Caching::EdgeOnly => {
                    if service.holder != Some(node) {
                        self.insert(node * self.m + k, t, rng);
                    }
                }
                Caching::OnPath => {
                    for i in 0..scratch.path.len() {
                        let v = scratch.path[i];
                        self.insert(v * self.m + k, t, rng);
                    }
                }
            }
            if t >= self.warmup {
                let b = self.batch_of(t);
                self.tally.record(b, k, &service, sizes[k]);
                self.tally.events.recorded += 1;
                if self.tally.trace.len() < cfg.trace_limit {
                    self.tally.trace.push(TraceRecord {
                        replica: self.replica,
                        time: t,
                        requester: node,
                        content: k,
                        holder: service.holder,
                        serving_level: service.serving_level,
                        hops: service.hops,
                    });
                }
            }
        }

        // Close every cache at the end of the window and check the books.
        let window = (end - self.warmup).max(0.0);
        let server = prepared.network.server_node();
        let mut worst = 0.0f64;
        for slot in 0..self.flags.present.len() {
            if Some(slot / self.m) == server {
                continue;
            }
            self.close(slot, end);
            worst = worst.max((self.available[slot] + self.absent[slot] - window).abs());
        }
        self.tally.accounting_error = worst;
        for b in 0..cfg.batches {
            let start = self.warmup + b as f64 * self.batch_width;
            let stop = if b + 1 == cfg.batches {
                end
            } else {
                (start + self.batch_width).min(end)
            };
            let width = (stop - start).max(0.0);
            if width == 0.0 {
                continue;
            }
            self.tally.add_exposure(b, width);
            for k in 0..self.m {
                for (l, &count) in prepared.caches_at_level.iter().enumerate() {
                    if count > 0 {
                        self.tally.add_presence(b, k, l, 0.0, width * count as f64);
                    }
                }
            }
        }
        self.tally.sim_clock = end;
        self.tally
    }
}

#[cfg(test)]
mod tests;
