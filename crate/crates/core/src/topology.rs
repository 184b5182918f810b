//! Network geometries.
//!
//! Two models are supported:
//!
//! * [`GridTopology`]: a diamond of Manhattan rings around a server at the
//!   origin. Level `i` holds the `4i` lattice points with `|x| + |y| = i`,
//!   for `1 <= i <= L`. Node index 0 is the server.
//! * [`RandomTopology`]: `n` uniform points on the unit square, partitioned
//!   into square cells of side `r`. The server sits in the cell containing
//!   the centre of the square.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("grid needs at least one level of requesters")]
    ZeroLevels,
    #[error("random network needs at least one node")]
    NoNodes,
    #[error("transmission range must lie in (0, 1], got {0}")]
    InvalidRange(f64),
    #[error("node {0} is not a requester")]
    NotARequester(usize),
    #[error("point ({x}, {y}) lies outside the grid")]
    OutsideGrid { x: i32, y: i32 },
}

/// Lattice offset from the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: i32,
    pub y: i32,
}

impl GridPoint {
    pub const ORIGIN: GridPoint = GridPoint { x: 0, y: 0 };

    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// Manhattan distance to the server.
    pub fn level(self) -> u32 {
        self.x.unsigned_abs() + self.y.unsigned_abs()
    }

    pub fn manhattan(self, other: GridPoint) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// How a request picks its next hop when two neighbours are one level closer
/// to the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentRule {
    /// Each closer neighbour with probability 1/2.
    #[default]
    Uniform,
    /// Split probabilities chosen so that every node of level `i` receives
    /// the same forwarded rate from level `i + 1`: from `(x, y)` at level
    /// `l`, `|x|` shrinks with probability `(2|x| - 1) / (2(l - 1))`.
    Balanced,
}

impl DescentRule {
    /// Probability of reducing `|x|` (as opposed to `|y|`) from an
    /// off-axis point.
    fn reduce_x_probability(self, p: GridPoint) -> f64 {
        match self {
            DescentRule::Uniform => 0.5,
            DescentRule::Balanced => {
                let level = p.level() as f64;
                (2.0 * p.x.unsigned_abs() as f64 - 1.0) / (2.0 * (level - 1.0))
            }
        }
    }
}

/// Concentric-ring grid around a central server.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology {
    levels: u32,
    points: Vec<GridPoint>,
    level_start: Vec<usize>,
    lookup: Vec<u32>,
}

const OUTSIDE: u32 = u32::MAX;

impl GridTopology {
    pub fn new(levels: u32) -> Result<Self, TopologyError> {
        if levels == 0 {
            return Err(TopologyError::ZeroLevels);
        }
        let l = levels as i32;
        let side = (2 * l + 1) as usize;
        let mut points = Vec::with_capacity(1 + 2 * levels as usize * (levels as usize + 1));
        let mut level_start = Vec::with_capacity(levels as usize + 2);
        let mut lookup = vec![OUTSIDE; side * side];

        for level in 0..=l {
            level_start.push(points.len());
            for x in -level..=level {
                let rest = level - x.abs();
                let ys: &[i32] = if rest == 0 { &[0] } else { &[-rest, rest] };
                for &y in ys {
                    let p = GridPoint::new(x, y);
                    lookup[Self::slot(l, p)] = points.len() as u32;
                    points.push(p);
                }
            }
        }
        level_start.push(points.len());

        Ok(Self {
            levels,
            points,
            level_start,
            lookup,
        })
    }

    fn slot(l: i32, p: GridPoint) -> usize {
        let side = 2 * l + 1;
        ((p.y + l) * side + (p.x + l)) as usize
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Number of requester nodes, `2L(L+1)`. The server is not counted.
    pub fn node_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn nodes_at_level(&self, level: u32) -> usize {
        if level > self.levels {
            return 0;
        }
        let i = level as usize;
        self.level_start[i + 1] - self.level_start[i]
    }

    /// Index range of the nodes at `level`.
    pub fn level_range(&self, level: u32) -> std::ops::Range<usize> {
        let i = level.min(self.levels + 1) as usize;
        if level > self.levels {
            return self.points.len()..self.points.len();
        }
        self.level_start[i]..self.level_start[i + 1]
    }

    /// Requester indices, `1..=N`.
    pub fn requesters(&self) -> std::ops::Range<usize> {
        1..self.points.len()
    }

    pub fn point(&self, index: usize) -> GridPoint {
        self.points[index]
    }

    pub fn level_of(&self, index: usize) -> u32 {
        self.points[index].level()
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        p.level() <= self.levels
    }

    pub fn index_of(&self, p: GridPoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let v = self.lookup[Self::slot(self.levels as i32, p)];
        (v != OUTSIDE).then_some(v as usize)
    }

    /// In-grid lattice neighbours (the server node included).
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.points[index];
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .filter_map(move |(dx, dy)| self.index_of(GridPoint::new(p.x + dx, p.y + dy)))
    }

    /// Lattice points (server included) within Manhattan distance `radius`
    /// of `center`, clipped to the grid.
    pub fn ring_population(&self, center: GridPoint, radius: u32) -> u64 {
        let l = self.levels as i64;
        let r = radius as i64;
        let (cx, cy) = (center.x as i64, center.y as i64);
        let mut count = 0u64;
        for dx in -r..=r {
            let x = cx + dx;
            let room = l - x.abs();
            if room < 0 {
                continue;
            }
            let w = r - dx.abs();
            let lo = (cy - w).max(-room);
            let hi = (cy + w).min(room);
            if hi >= lo {
                count += (hi - lo + 1) as u64;
            }
        }
        count
    }

    /// Unclipped population of a Manhattan ball, `2l^2 + 2l + 1`.
    pub fn interior_ring_population(radius: u32) -> u64 {
        let r = radius as u64;
        2 * r * r + 2 * r + 1
    }

    /// Fills `out` with the in-grid node indices at exactly `radius` hops
    /// from `center`. The server index 0 appears when it is on that ring.
    pub fn ring_at(&self, center: GridPoint, radius: u32, out: &mut Vec<usize>) {
        out.clear();
        if radius == 0 {
            if let Some(i) = self.index_of(center) {
                out.push(i);
            }
            return;
        }
        let r = radius as i32;
        for t in 0..r {
            // One point per side of the diamond, walking counter-clockwise.
            let candidates = [
                GridPoint::new(center.x + r - t, center.y + t),
                GridPoint::new(center.x - t, center.y + r - t),
                GridPoint::new(center.x - r + t, center.y - t),
                GridPoint::new(center.x + t, center.y - r + t),
            ];
            for p in candidates {
                if let Some(i) = self.index_of(p) {
                    out.push(i);
                }
            }
        }
    }

    /// Neighbours one level closer to the server. Axis points have one,
    /// off-axis points two.
    pub fn descent_options(p: GridPoint) -> (GridPoint, Option<GridPoint>) {
        let step_x = GridPoint::new(p.x - p.x.signum(), p.y);
        let step_y = GridPoint::new(p.x, p.y - p.y.signum());
        match (p.x == 0, p.y == 0) {
            (true, _) => (step_y, None),
            (_, true) => (step_x, None),
            _ => (step_x, Some(step_y)),
        }
    }

    /// One hop toward the server.
    pub fn descent_step<R: Rng + ?Sized>(
        p: GridPoint,
        rule: DescentRule,
        rng: &mut R,
    ) -> GridPoint {
        match Self::descent_options(p) {
            (only, None) => only,
            (reduce_x, Some(reduce_y)) => {
                if rng.random::<f64>() < rule.reduce_x_probability(p) {
                    reduce_x
                } else {
                    reduce_y
                }
            }
        }
    }

    /// Shortest path from a requester to the server, as node indices. The
    /// requester comes first and the server (index 0) last.
    pub fn sample_descent_path<R: Rng + ?Sized>(
        &self,
        node: usize,
        rule: DescentRule,
        rng: &mut R,
    ) -> Result<Vec<usize>, TopologyError> {
        if node == 0 || node >= self.points.len() {
            return Err(TopologyError::NotARequester(node));
        }
        let mut p = self.points[node];
        let mut path = Vec::with_capacity(p.level() as usize + 1);
        path.push(node);
        while p != GridPoint::ORIGIN {
            p = Self::descent_step(p, rule, rng);
            path.push(self.index_of(p).expect("descent stays inside the grid"));
        }
        Ok(path)
    }

    /// A shortest in-grid lattice path from `from` to `to`, excluding `to`.
    pub fn lattice_path(&self, from: GridPoint, to: GridPoint, out: &mut Vec<usize>) {
        out.clear();
        let mut p = from;
        while p != to {
            if let Some(i) = self.index_of(p) {
                out.push(i);
            }
            let sx = GridPoint::new(p.x + (to.x - p.x).signum(), p.y);
            let sy = GridPoint::new(p.x, p.y + (to.y - p.y).signum());
            // At least one move toward `to` stays inside the diamond.
            p = if p.x != to.x && self.contains(sx) {
                sx
            } else if p.y != to.y && self.contains(sy) {
                sy
            } else {
                sx
            };
        }
    }
}

/// Build the grid with `levels` rings of requesters around the server.
pub fn build_grid(levels: u32) -> Result<GridTopology, TopologyError> {
    GridTopology::new(levels)
}

/// Cell coordinates on the random network's lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

/// Nodes dropped uniformly over the unit square, binned into cells of side `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomTopology {
    range: f64,
    seed: u64,
    per_side: usize,
    positions: Vec<(f64, f64)>,
    node_cell: Vec<usize>,
    members: Vec<Vec<usize>>,
    server_cell: usize,
    connected: bool,
}

impl RandomTopology {
    pub fn new(n: usize, range: f64, seed: u64) -> Result<Self, TopologyError> {
        Self::with_connectivity_constant(n, range, seed, 1.0)
    }

    /// `connectivity_constant` is the `c` in `r >= c * sqrt(ln n / n)`.
    pub fn with_connectivity_constant(
        n: usize,
        range: f64,
        seed: u64,
        connectivity_constant: f64,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::NoNodes);
        }
        if !(range > 0.0 && range <= 1.0) {
            return Err(TopologyError::InvalidRange(range));
        }
        let per_side = cells_per_side(range);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut members = vec![Vec::new(); per_side * per_side];
        let node_cell: Vec<usize> = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let c = cell_index(per_side, range, x, y);
                members[c].push(i);
                c
            })
            .collect();
        let server_cell = cell_index(per_side, range, 0.5, 0.5);
        let connected = range >= connectivity_threshold(n, connectivity_constant);
        Ok(Self {
            range,
            seed,
            per_side,
            positions,
            node_cell,
            members,
            server_cell,
            connected,
        })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cells_per_side(&self) -> usize {
        self.per_side
    }

    pub fn cell_count(&self) -> usize {
        self.per_side * self.per_side
    }

    pub fn position(&self, node: usize) -> (f64, f64) {
        self.positions[node]
    }

    pub fn cell_of(&self, node: usize) -> usize {
        self.node_cell[node]
    }

    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[cell]
    }

    pub fn server_cell(&self) -> usize {
        self.server_cell
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell {
            col: index % self.per_side,
            row: index / self.per_side,
        }
    }

    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.row * self.per_side + cell.col
    }

    /// Manhattan distance between two cells of the lattice.
    pub fn cell_ring_distance(&self, a: usize, b: usize) -> u32 {
        let (ca, cb) = (self.cell(a), self.cell(b));
        (ca.col.abs_diff(cb.col) + ca.row.abs_diff(cb.row)) as u32
    }

    /// Cell distance of a node from the server cell.
    pub fn level_of(&self, node: usize) -> u32 {
        self.cell_ring_distance(self.node_cell[node], self.server_cell)
    }

    pub fn max_level(&self) -> u32 {
        (0..self.cell_count())
            .map(|c| self.cell_ring_distance(c, self.server_cell))
            .max()
            .unwrap_or(0)
    }

    /// Realized node count per cell, as floats for the analytic routines.
    pub fn occupancy_lattice(&self) -> CellLattice {
        CellLattice {
            per_side: self.per_side,
            server: self.cell(self.server_cell),
            occupancy: self.members.iter().map(|m| m.len() as f64).collect(),
        }
    }
}

/// Build a random network of `n` nodes with cell side `range`.
pub fn build_random(n: usize, range: f64, seed: u64) -> Result<RandomTopology, TopologyError> {
    RandomTopology::new(n, range, seed)
}

/// `c * sqrt(ln n / n)`.
pub fn connectivity_threshold(n: usize, constant: f64) -> f64 {
    let n = n as f64;
    if n <= 1.0 {
        return 0.0;
    }
    constant * (n.ln() / n).sqrt()
}

/// `ceil(1/r)`, robust to `1/r` landing a hair above an integer.
pub fn cells_per_side(range: f64) -> usize {
    let inv = 1.0 / range;
    let k = (inv - 1e-9).ceil();
    k.max(1.0) as usize
}

fn cell_index(per_side: usize, range: f64, x: f64, y: f64) -> usize {
    let col = ((x / range).floor() as usize).min(per_side - 1);
    let row = ((y / range).floor() as usize).min(per_side - 1);
    row * per_side + col
}

/// Per-cell node counts on a square cell lattice, either realized from a
/// [`RandomTopology`] or the fluid expectation `n * area(cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLattice {
    pub per_side: usize,
    pub server: Cell,
    pub occupancy: Vec<f64>,
}

impl CellLattice {
    /// Expected occupancy `n * area` per cell; boundary cells are clipped to
    /// the unit square.
    pub fn fluid(n: usize, range: f64) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::NoNodes);
        }
        if !(range > 0.0 && range <= 1.0) {
            return Err(TopologyError::InvalidRange(range));
        }
        let per_side = cells_per_side(range);
        let extent = |i: usize| (1.0 - i as f64 * range).clamp(0.0, range);
        let mut occupancy = Vec::with_capacity(per_side * per_side);
        for row in 0..per_side {
            for col in 0..per_side {
                occupancy.push(n as f64 * extent(col) * extent(row));
            }
        }
        let s = cell_index(per_side, range, 0.5, 0.5);
        Ok(Self {
            per_side,
            server: Cell {
                col: s % per_side,
                row: s / per_side,
            },
            occupancy,
        })
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell {
            col: index % self.per_side,
            row: index / self.per_side,
        }
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.per_side + cell.col
    }

    pub fn server_index(&self) -> usize {
        self.index(self.server)
    }

    pub fn distance_to_server(&self, index: usize) -> u32 {
        let c = self.cell(index);
        (c.col.abs_diff(self.server.col) + c.row.abs_diff(self.server.row)) as u32
    }

    /// Cells one step closer to the server (one on the axes, two otherwise).
    pub fn descent_options(&self, index: usize) -> (usize, Option<usize>) {
        let c = self.cell(index);
        let toward = |a: usize, b: usize| if a > b { a - 1 } else { a + 1 };
        let step_col = Cell {
            col: toward(c.col, self.server.col),
            row: c.row,
        };
        let step_row = Cell {
            col: c.col,
            row: toward(c.row, self.server.row),
        };
        match (c.col == self.server.col, c.row == self.server.row) {
            (true, _) => (self.index(step_row), None),
            (_, true) => (self.index(step_col), None),
            _ => (self.index(step_col), Some(self.index(step_row))),
        }
    }
}
