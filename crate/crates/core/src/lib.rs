//! Analytic and simulated latency and throughput of networks of TTL caches.

pub mod capacity;
pub mod content;
pub mod hopcount;
pub mod scaling;
pub mod simulator;
pub mod topology;
