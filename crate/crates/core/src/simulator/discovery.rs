//! Content discovery over a cache state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::CacheView;
use crate::topology::{CellLattice, DescentRule, GridTopology, RandomTopology};

/// How a request finds a copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discovery {
    /// Follow the shortest path toward the server.
    #[default]
    Pathwise,
    /// Search rings of growing hop radius for the nearest copy.
    Ring,
}

/// Outcome of one discovery. `holder` is `None` when the server serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Service {
    pub holder: Option<usize>,
    pub serving_level: u32,
    pub hops: u32,
}

/// Reusable buffers for discovery.
#[derive(Debug, Default)]
pub struct Scratch {
    /// Nodes the request passed through without finding a copy, requester
    /// first. These receive a copy under on-path caching.
    pub path: Vec<usize>,
    ring: Vec<usize>,
    holders: Vec<Option<usize>>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Walk a sampled descent path; the first holder serves, else the server.
pub fn discover_pathwise<V: CacheView, R: Rng + ?Sized>(
    topo: &GridTopology,
    view: &mut V,
    requester: usize,
    content: usize,
    rule: DescentRule,
    rng: &mut R,
    scratch: &mut Scratch,
) -> Service {
    scratch.path.clear();
    let mut p = topo.point(requester);
    let mut node = requester;
    let mut hops = 0;
    loop {
        if node == 0 {
            return Service {
                holder: None,
                serving_level: 0,
                hops,
            };
        }
        if view.holds(node, content, rng) {
            return Service {
                holder: Some(node),
                serving_level: p.level(),
                hops,
            };
        }
        scratch.path.push(node);
        p = GridTopology::descent_step(p, rule, rng);
        node = topo.index_of(p).expect("descent stays inside the grid");
        hops += 1;
    }
}

/// Expanding-ring search over the clipped grid. The server is a holder at
/// its own position; ties at the nearest ring are broken uniformly. The
/// returned path is a shortest lattice path to the holder.
pub fn discover_ring<V: CacheView, R: Rng + ?Sized>(
    topo: &GridTopology,
    view: &mut V,
    requester: usize,
    content: usize,
    rng: &mut R,
    scratch: &mut Scratch,
) -> Service {
    let center = topo.point(requester);
    for radius in 0..=center.level() {
        topo.ring_at(center, radius, &mut scratch.ring);
        scratch.holders.clear();
        for &v in &scratch.ring {
            if v == 0 {
                scratch.holders.push(None);
            } else if view.holds(v, content, rng) {
                scratch.holders.push(Some(v));
            }
        }
        if scratch.holders.is_empty() {
            continue;
        }
        let holder = scratch.holders[rng.random_range(0..scratch.holders.len())];
        let target = holder.map_or(crate::topology::GridPoint::ORIGIN, |h| topo.point(h));
        topo.lattice_path(center, target, &mut scratch.path);
        return Service {
            holder,
            serving_level: holder.map_or(0, |h| topo.level_of(h)),
            hops: radius,
        };
    }
    unreachable!("the server lies on the ring at the requester's level")
}

/// Path-wise search on the random network. One transmission reaches the
/// requester's cell mates and the next cell toward the server; the request
/// is then relayed by a uniform node of that cell. Empty cells still cost a
/// hop. The server answers once its cell is reached.
pub fn discover_random<V: CacheView, R: Rng + ?Sized>(
    topo: &RandomTopology,
    lattice: &CellLattice,
    view: &mut V,
    requester: usize,
    content: usize,
    rng: &mut R,
    scratch: &mut Scratch,
) -> Service {
    scratch.path.clear();
    if view.holds(requester, content, rng) {
        return Service {
            holder: Some(requester),
            serving_level: topo.level_of(requester),
            hops: 0,
        };
    }
    scratch.path.push(requester);
    let server_cell = topo.server_cell();
    let mut cell = topo.cell_of(requester);
    scratch.holders.clear();
    for &v in topo.members(cell) {
        if v != requester && view.holds(v, content, rng) {
            scratch.holders.push(Some(v));
        }
    }
    let pick = |scratch: &mut Scratch, rng: &mut R, hops: u32| {
        let holder = scratch.holders[rng.random_range(0..scratch.holders.len())];
        Service {
            holder,
            serving_level: holder.map_or(0, |h| topo.level_of(h)),
            hops,
        }
    };
    if cell == server_cell {
        scratch.holders.push(None);
        return pick(scratch, rng, 1);
    }
    let mut hops = 0;
    loop {
        hops += 1;
        let next = match lattice.descent_options(cell) {
            (a, None) => a,
            (a, Some(b)) => {
                if rng.random::<bool>() {
                    a
                } else {
                    b
                }
            }
        };
        for &v in topo.members(next) {
            if view.holds(v, content, rng) {
                scratch.holders.push(Some(v));
            }
        }
        if next == server_cell {
            scratch.holders.push(None);
        }
        if !scratch.holders.is_empty() {
            return pick(scratch, rng, hops);
        }
        let relays = topo.members(next);
        if !relays.is_empty() {
            scratch.path.push(relays[rng.random_range(0..relays.len())]);
        }
        cell = next;
    }
}
