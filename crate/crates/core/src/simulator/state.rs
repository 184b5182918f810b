//! Cache contents: fixed, sampled per snapshot, or evolving under TTLs.

use rand::Rng;

use crate::content::OccupancyProfile;

/// Read access to "does `node` hold `content`". Sampled states may draw
/// randomness on first access.
pub trait CacheView {
    fn holds<R: Rng + ?Sized>(&mut self, node: usize, content: usize, rng: &mut R) -> bool;
}

/// A constructed, fixed state.
#[derive(Debug, Clone)]
pub struct StaticCaches {
    contents: usize,
    held: Vec<bool>,
}

impl StaticCaches {
    pub fn new(nodes: usize, contents: usize) -> Self {
        Self {
            contents,
            held: vec![false; nodes * contents],
        }
    }

    pub fn set(&mut self, node: usize, content: usize, held: bool) {
        self.held[node * self.contents + content] = held;
    }
}

impl CacheView for StaticCaches {
    fn holds<R: Rng + ?Sized>(&mut self, node: usize, content: usize, _rng: &mut R) -> bool {
        self.held[node * self.contents + content]
    }
}

/// Independent presence per cache, drawn lazily from an occupancy profile.
/// A new snapshot invalidates every draw by bumping the generation.
#[derive(Debug, Clone)]
pub struct SnapshotState {
    profile: OccupancyProfile,
    contents: usize,
    levels: Vec<u32>,
    server: Option<usize>,
    levels_plus_one: usize,
    stamp: Vec<u32>,
    value: Vec<bool>,
    generation: u32,
    /// Presence draws since the last `take_draws`, indexed `content * levels + level`.
    drawn: Vec<u64>,
    present: Vec<u64>,
}

impl SnapshotState {
    /// `levels[node]` is each node's level. The server always holds; other
    /// level-0 nodes (inside the server cell of a random network) use the
    /// level-1 presence.
    pub fn new(profile: OccupancyProfile, levels: Vec<u32>, server: Option<usize>) -> Self {
        let contents = profile.contents();
        let levels_plus_one = levels.iter().copied().max().unwrap_or(0) as usize + 1;
        let slots = levels.len() * contents;
        Self {
            profile,
            contents,
            levels,
            server,
            levels_plus_one,
            stamp: vec![0; slots],
            value: vec![false; slots],
            generation: 1,
            drawn: vec![0; contents * levels_plus_one],
            present: vec![0; contents * levels_plus_one],
        }
    }

    pub fn new_snapshot(&mut self) {
        if self.generation == u32::MAX {
            self.stamp.fill(0);
            self.generation = 0;
        }
        self.generation += 1;
    }

    /// Returns and clears the per-(content, level) draw counters as
    /// `(present, drawn)`.
    pub fn take_draws(&mut self) -> (Vec<u64>, Vec<u64>) {
        let n = self.drawn.len();
        (
            std::mem::replace(&mut self.present, vec![0; n]),
            std::mem::replace(&mut self.drawn, vec![0; n]),
        )
    }
}

impl CacheView for SnapshotState {
    fn holds<R: Rng + ?Sized>(&mut self, node: usize, content: usize, rng: &mut R) -> bool {
        if Some(node) == self.server {
            return true;
        }
        let level = self.levels[node] as usize;
        let slot = node * self.contents + content;
        if self.stamp[slot] != self.generation {
            let rho = self.profile.rho(content, level.max(1));
            let held = rng.random::<f64>() < rho;
            self.stamp[slot] = self.generation;
            self.value[slot] = held;
            let key = content * self.levels_plus_one + level;
            self.drawn[key] += 1;
            self.present[key] += held as u64;
        }
        self.value[slot]
    }
}

/// Presence flags maintained by the TTL engine.
#[derive(Debug, Clone)]
pub struct PresenceFlags {
    pub contents: usize,
    pub present: Vec<bool>,
}

impl CacheView for PresenceFlags {
    fn holds<R: Rng + ?Sized>(&mut self, node: usize, content: usize, _rng: &mut R) -> bool {
        self.present[node * self.contents + content]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snapshot_draws_are_memoized_within_a_generation() {
        let profile = OccupancyProfile::uniform(vec![0.5]).unwrap();
        let mut s = SnapshotState::new(profile, vec![0, 1, 1, 1, 1], Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first: Vec<bool> = (0..5).map(|v| s.holds(v, 0, &mut rng)).collect();
        let again: Vec<bool> = (0..5).map(|v| s.holds(v, 0, &mut rng)).collect();
        assert_eq!(first, again);
        assert!(first[0]);
        let (_, drawn) = s.take_draws();
        assert_eq!(drawn[1], 4);
    }

    #[test]
    fn snapshot_frequency_matches_profile() {
        let profile = OccupancyProfile::levelwise(vec![vec![1.0, 0.2, 0.7]]).unwrap();
        let mut s = SnapshotState::new(profile, vec![0, 1, 2], Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let trials = 20_000;
        let mut hits = [0usize; 3];
        for _ in 0..trials {
            s.new_snapshot();
            for (v, h) in hits.iter_mut().enumerate() {
                *h += s.holds(v, 0, &mut rng) as usize;
            }
        }
        assert_eq!(hits[0], trials);
        assert!((hits[1] as f64 / trials as f64 - 0.2).abs() < 0.015);
        assert!((hits[2] as f64 / trials as f64 - 0.7).abs() < 0.015);
    }
}
