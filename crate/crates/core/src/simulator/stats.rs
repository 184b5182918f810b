//! Batch-means accumulation and the simulation summary.

use serde::{Deserialize, Serialize};

use super::discovery::Service;
use super::trace::TraceRecord;

/// Point estimate with a batch-means standard error. The error is `None`
/// when fewer than two batches carry data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: Option<f64>,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            stderr: Some(0.0),
        }
    }

    /// Whether `value` lies within `k` standard errors. A zero error only
    /// accepts the exact value.
    pub fn within(&self, value: f64, k: f64) -> bool {
        match self.stderr {
            Some(se) => (self.mean - value).abs() <= k * se + 1e-12 * value.abs().max(1.0),
            None => false,
        }
    }
}

/// Ratio estimator `sum num / sum den` with the spread of per-batch ratios.
fn ratio_estimate(pairs: impl Iterator<Item = (f64, f64)>) -> Option<Estimate> {
    let pairs: Vec<(f64, f64)> = pairs.filter(|&(_, d)| d > 0.0).collect();
    let den: f64 = pairs.iter().map(|p| p.1).sum();
    if den <= 0.0 {
        return None;
    }
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / den;
    let b = pairs.len();
    let stderr = (b >= 2).then(|| {
        let ratios = pairs.iter().map(|&(n, d)| n / d);
        let avg = ratios.clone().sum::<f64>() / b as f64;
        let var = ratios.map(|x| (x - avg) * (x - avg)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    });
    Some(Estimate { mean, stderr })
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContentBatch {
    requests: u64,
    hops: u64,
    server: u64,
    nonlocal: u64,
    traffic: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Batch {
    /// Request-rate exposure: elapsed time, or samples per node in snapshot
    /// mode where every node requests at rate one.
    exposure: f64,
    content: Vec<ContentBatch>,
    rho_num: Vec<f64>,
    rho_den: Vec<f64>,
}

/// Event counters of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub requests: u64,
    pub recorded: u64,
    pub expiries: u64,
    pub insertions: u64,
}

/// Raw accumulators of one replica; merge replicas in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    contents: usize,
    levels_plus_one: usize,
    batches: Vec<Batch>,
    pub(crate) events: EventCounts,
    pub(crate) sim_clock: f64,
    pub(crate) partial: bool,
    pub(crate) accounting_error: f64,
    pub(crate) trace: Vec<TraceRecord>,
}

impl Tally {
    pub(crate) fn new(contents: usize, levels_plus_one: usize, batches: usize) -> Self {
        let batch = Batch {
            exposure: 0.0,
            content: vec![ContentBatch::default(); contents],
            rho_num: vec![0.0; contents * levels_plus_one],
            rho_den: vec![0.0; contents * levels_plus_one],
        };
        Self {
            contents,
            levels_plus_one,
            batches: vec![batch; batches],
            events: EventCounts::default(),
            sim_clock: 0.0,
            partial: false,
            accounting_error: 0.0,
            trace: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, batch: usize, content: usize, service: &Service, size: f64) {
        let c = &mut self.batches[batch].content[content];
        c.requests += 1;
        c.hops += service.hops as u64;
        c.server += service.holder.is_none() as u64;
        c.nonlocal += (service.hops > 0) as u64;
        c.traffic += size * service.hops as f64;
    }

    pub(crate) fn add_presence(
        &mut self,
        batch: usize,
        content: usize,
        level: usize,
        num: f64,
        den: f64,
    ) {
        let key = content * self.levels_plus_one + level;
        let b = &mut self.batches[batch];
        b.rho_num[key] += num;
        b.rho_den[key] += den;
    }

    pub(crate) fn add_exposure(&mut self, batch: usize, exposure: f64) {
        self.batches[batch].exposure += exposure;
    }

    /// Concatenate replica batches in the given order.
    pub fn merge(tallies: Vec<Tally>) -> Option<Tally> {
        let mut iter = tallies.into_iter();
        let mut acc = iter.next()?;
        for t in iter {
            assert_eq!(
                (t.contents, t.levels_plus_one),
                (acc.contents, acc.levels_plus_one)
            );
            acc.batches.extend(t.batches);
            acc.events.requests += t.events.requests;
            acc.events.recorded += t.events.recorded;
            acc.events.expiries += t.events.expiries;
            acc.events.insertions += t.events.insertions;
            acc.sim_clock = acc.sim_clock.min(t.sim_clock);
            acc.partial |= t.partial;
            acc.accounting_error = acc.accounting_error.max(t.accounting_error);
            acc.trace.extend(t.trace);
        }
        Some(acc)
    }

    pub fn finish(self) -> SimResult {
        let none = Estimate {
            mean: f64::NAN,
            stderr: None,
        };
        let pick = |e: Option<Estimate>| e.unwrap_or(none);
        let batches = &self.batches;
        let sum =
            |f: &dyn Fn(&ContentBatch) -> f64, b: &Batch| b.content.iter().map(f).sum::<f64>();

        let contents = (0..self.contents)
            .map(|k| {
                let per = |f: fn(&ContentBatch) -> f64, by_requests: bool| {
                    ratio_estimate(batches.iter().map(|b| {
                        let c = &b.content[k];
                        (
                            f(c),
                            if by_requests {
                                c.requests as f64
                            } else {
                                b.exposure
                            },
                        )
                    }))
                };
                let rho_levels = (0..self.levels_plus_one)
                    .map(|l| {
                        let key = k * self.levels_plus_one + l;
                        ratio_estimate(batches.iter().map(|b| (b.rho_num[key], b.rho_den[key])))
                    })
                    .collect();
                let range = k * self.levels_plus_one..(k + 1) * self.levels_plus_one;
                let rho_mean = ratio_estimate(batches.iter().map(|b| {
                    (
                        b.rho_num[range.clone()].iter().sum::<f64>(),
                        b.rho_den[range.clone()].iter().sum::<f64>(),
                    )
                }));
                ContentResult {
                    content: k,
                    requests: batches.iter().map(|b| b.content[k].requests).sum(),
                    mean_hops: pick(per(|c| c.hops as f64, true)),
                    server_fraction: pick(per(|c| c.server as f64, true)),
                    request_rate: pick(per(|c| c.requests as f64, false)),
                    total_request_rate: pick(per(|c| c.nonlocal as f64, false)),
                    total_traffic: pick(per(|c| c.traffic, false)),
                    rho_mean,
                    rho_levels,
                }
            })
            .collect();

        let overall = |f: &dyn Fn(&ContentBatch) -> f64, by_requests: bool| {
            pick(ratio_estimate(batches.iter().map(|b| {
                let den = if by_requests {
                    sum(&|c| c.requests as f64, b)
                } else {
                    b.exposure
                };
                (sum(f, b), den)
            })))
        };
        let server_rate = overall(&|c| c.server as f64, false);
        SimResult {
            mean_hops: overall(&|c| c.hops as f64, true),
            server_fraction: overall(&|c| c.server as f64, true),
            server_link_rate: Estimate {
                mean: server_rate.mean / 4.0,
                stderr: server_rate.stderr.map(|s| s / 4.0),
            },
            request_rate: overall(&|c| c.requests as f64, false),
            total_request_rate: overall(&|c| c.nonlocal as f64, false),
            total_traffic: overall(&|c| c.traffic, false),
            contents,
            batches: self.batches.len(),
            events: self.events,
            sim_clock: self.sim_clock,
            partial: self.partial,
            accounting_error: self.accounting_error,
            trace: self.trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentResult {
    pub content: usize,
    pub requests: u64,
    pub mean_hops: Estimate,
    pub server_fraction: Estimate,
    /// All requests per unit time, local hits included.
    pub request_rate: Estimate,
    /// Requests leaving the requester per unit time.
    pub total_request_rate: Estimate,
    /// Size times hops per unit time.
    pub total_traffic: Estimate,
    /// Node-averaged presence.
    pub rho_mean: Option<Estimate>,
    /// Presence per level; `None` where no cache was observed.
    pub rho_levels: Vec<Option<Estimate>>,
}

/// Summary of a simulation run. Rates in snapshot mode assume every node
/// requests at rate one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub contents: Vec<ContentResult>,
    pub mean_hops: Estimate,
    pub server_fraction: Estimate,
    /// Server-served rate divided over the four server links.
    pub server_link_rate: Estimate,
    pub request_rate: Estimate,
    pub total_request_rate: Estimate,
    pub total_traffic: Estimate,
    pub batches: usize,
    pub events: EventCounts,
    pub sim_clock: f64,
    /// The event budget ran out before the horizon.
    pub partial: bool,
    /// Largest per-cache gap between accounted time and the observed window.
    pub accounting_error: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_estimate_pools_batches() {
        let e = ratio_estimate([(1.0, 2.0), (3.0, 2.0)].into_iter()).unwrap();
        assert_eq!(e.mean, 1.0);
        let se = e.stderr.unwrap();
        // Batch ratios 0.5 and 1.5: sd = 0.7071, se = 0.5.
        assert!((se - 0.5).abs() < 1e-12);
        assert!(ratio_estimate([(1.0, 0.0)].into_iter()).is_none());
        assert_eq!(
            ratio_estimate([(1.0, 4.0)].into_iter()).unwrap().stderr,
            None
        );
    }

    #[test]
    fn merge_concatenates_batches() {
        let mut a = Tally::new(1, 2, 2);
        let mut b = Tally::new(1, 2, 3);
        let s = Service {
            holder: None,
            serving_level: 0,
            hops: 2,
        };
        a.record(0, 0, &s, 1.0);
        b.record(2, 0, &s, 1.0);
        let m = Tally::merge(vec![a, b]).unwrap();
        assert_eq!(m.batches.len(), 5);
        let r = m.finish();
        assert_eq!(r.contents[0].requests, 2);
        assert_eq!(r.mean_hops.mean, 2.0);
    }
}
