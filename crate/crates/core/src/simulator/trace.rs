//! Per-service event records and the hop recount check.

use serde::{Deserialize, Serialize};

use super::Network;
use crate::topology::GridPoint;

/// One served request. `holder` is `None` for the server. In snapshot mode
/// `time` is the sample index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub replica: u64,
    pub time: f64,
    pub requester: usize,
    pub content: usize,
    pub holder: Option<usize>,
    pub serving_level: u32,
    pub hops: u32,
}

/// Hop count implied by the logged holder: lattice distance on the grid,
/// cell distance (at least one hop off the requester) on random networks.
pub fn recount_hops(network: &Network, record: &TraceRecord) -> u32 {
    match network {
        Network::Grid(g) => {
            let at = record.holder.map_or(GridPoint::ORIGIN, |h| g.point(h));
            g.point(record.requester).manhattan(at)
        }
        Network::Random { topo, .. } => match record.holder {
            Some(h) if h == record.requester => 0,
            Some(h) => topo
                .cell_ring_distance(topo.cell_of(record.requester), topo.cell_of(h))
                .max(1),
            None => topo.level_of(record.requester).max(1),
        },
    }
}

/// Records whose logged hops disagree with the recount.
pub fn hop_mismatches<'a>(
    network: &'a Network,
    records: &'a [TraceRecord],
) -> impl Iterator<Item = &'a TraceRecord> + 'a {
    records
        .iter()
        .filter(move |r| recount_hops(network, r) != r.hops)
}
