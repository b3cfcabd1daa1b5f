//! Ground-truth 2D grid world: terrain, clearance, sensing, kinematics.
//!
//! The world is the only holder of ground truth. Agents interact with it
//! through ray-cast sweeps (relative measurements) and motion commands;
//! everything they believe about geometry is reconstructed from those
//! measurements plus drifting odometry.

use crate::geom::{wrap_angle, Point2, Pose2};
use crate::types::{AgentId, AgentKind, ArtefactClass};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Default cell edge length, meters.
pub const DEFAULT_CELL_SIZE: f64 = 0.25;
/// Default lidar range, meters.
pub const DEFAULT_SENSOR_RANGE: f64 = 20.0;
/// Default lidar range noise, meters (1 sigma).
pub const DEFAULT_RANGE_SIGMA: f64 = 0.02;
/// Default sweep resolution, radians (1 degree).
pub const DEFAULT_SWEEP_RESOLUTION: f64 = std::f64::consts::PI / 180.0;
/// Odometry drift: position diffusion per sqrt-meter traveled.
pub const DEFAULT_DRIFT_SIGMA_XY: f64 = 0.01;
/// Odometry drift: heading diffusion per sqrt-meter traveled, radians.
pub const DEFAULT_DRIFT_SIGMA_THETA: f64 = 0.2 * std::f64::consts::PI / 180.0;
/// Consecutive blocked motion ticks that count as a navigation failure.
pub const NAV_FAILURE_BLOCKED_TICKS: u32 = 5;
/// Clearance values are capped here; anything wider is "open space".
pub const CLEARANCE_CAP: f64 = 3.0;

/// Terrain class of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Free,
    Wall,
    Rough,
}

/// A ground-truth artefact placed in the world.
#[derive(Debug, Clone)]
pub struct Artefact {
    pub class: ArtefactClass,
    pub pos: Point2,
}

/// One lidar sweep: noisy wall returns in the body frame plus the true cells
/// the rays passed over (used for coverage accounting and terrain knowledge).
#[derive(Debug, Clone, Default)]
pub struct Sweep {
    /// Wall returns in the agent body frame.
    pub points: Vec<Point2>,
    /// Body-frame angles of rays that ran to full range without a return.
    pub misses: Vec<f64>,
    /// Non-wall cells the rays traversed, true grid indices.
    pub seen_free: Vec<(u16, u16)>,
    /// Wall cells that produced returns, true grid indices.
    pub seen_walls: Vec<(u16, u16)>,
}

/// Static grid world plus coverage bookkeeping.
#[derive(Debug, Clone)]
pub struct GridWorld {
    width: u16,
    height: u16,
    cell_size: f64,
    cells: Vec<CellKind>,
    /// Widest free corridor through each cell, meters, capped at
    /// [`CLEARANCE_CAP`]. Zero for walls.
    clearance: Vec<f64>,
    /// Planning cost multiplier for rough cells.
    rough_cost: f64,
    pub artefacts: Vec<Artefact>,
    observed: Vec<bool>,
    reachable: Vec<bool>,
    n_reachable: usize,
    n_observed_reachable: usize,
}

impl GridWorld {
    pub fn new(width: u16, height: u16, cell_size: f64, cells: Vec<CellKind>, rough_cost: f64) -> Self {
        assert_eq!(cells.len(), width as usize * height as usize);
        let clearance = compute_clearance(width, height, cell_size, &cells);
        GridWorld {
            width,
            height,
            cell_size,
            cells,
            clearance,
            rough_cost,
            artefacts: Vec::new(),
            observed: vec![false; (width as usize) * (height as usize)],
            reachable: Vec::new(),
            n_reachable: 0,
            n_observed_reachable: 0,
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn rough_cost(&self) -> f64 {
        self.rough_cost
    }

    fn idx(&self, row: u16, col: u16) -> usize {
        row as usize * self.width as usize + col as usize
    }

    pub fn kind(&self, row: u16, col: u16) -> CellKind {
        self.cells[self.idx(row, col)]
    }

    /// Inscribed free-space width at the cell, meters.
    pub fn clearance(&self, row: u16, col: u16) -> f64 {
        self.clearance[self.idx(row, col)]
    }

    /// Center of a cell in world coordinates.
    pub fn cell_center(&self, row: u16, col: u16) -> Point2 {
        Point2::new(
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a point, or None when out of bounds.
    pub fn cell_of(&self, p: Point2) -> Option<(u16, u16)> {
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let col = (p.x / self.cell_size) as u64;
        let row = (p.y / self.cell_size) as u64;
        if col >= self.width as u64 || row >= self.height as u64 {
            None
        } else {
            Some((row as u16, col as u16))
        }
    }

    /// Whether an agent of the given kind and passage width may occupy the cell.
    pub fn traversable(&self, row: u16, col: u16, kind: AgentKind, passage_width: f64) -> bool {
        match self.kind(row, col) {
            CellKind::Wall => false,
            CellKind::Rough | CellKind::Free => {
                self.clearance(row, col) + 1e-9 >= passage_width || kind == AgentKind::Base
            }
        }
    }

    /// Planning cost of a cell for a platform (1.0 on clear ground).
    pub fn cell_cost(&self, row: u16, col: u16, kind: AgentKind) -> Option<f64> {
        match self.kind(row, col) {
            CellKind::Wall => None,
            CellKind::Free => Some(1.0),
            CellKind::Rough => Some(if kind.ignores_rough() { 1.0 } else { self.rough_cost }),
        }
    }

    /// Marks coverage support: cells reachable (4-connected, through non-wall
    /// cells) from any of the given start points.
    pub fn compute_reachable(&mut self, starts: &[Point2]) {
        let n = self.cells.len();
        let mut reach = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        for &s in starts {
            if let Some((r, c)) = self.cell_of(s) {
                let i = self.idx(r, c);
                if self.cells[i] != CellKind::Wall && !reach[i] {
                    reach[i] = true;
                    queue.push_back((r, c));
                }
            }
        }
        while let Some((r, c)) = queue.pop_front() {
            let neighbors = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for (nr, nc) in neighbors {
                if nr < self.height && nc < self.width {
                    let i = self.idx(nr, nc);
                    if self.cells[i] != CellKind::Wall && !reach[i] {
                        reach[i] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
        self.n_reachable = reach.iter().filter(|&&b| b).count();
        self.n_observed_reachable = reach
            .iter()
            .zip(&self.observed)
            .filter(|(&r, &o)| r && o)
            .count();
        self.reachable = reach;
    }

    /// Fraction of reachable non-wall cells sensed so far.
    pub fn coverage(&self) -> f64 {
        if self.n_reachable == 0 {
            return 0.0;
        }
        self.n_observed_reachable as f64 / self.n_reachable as f64
    }

    fn mark_observed(&mut self, row: u16, col: u16) {
        let i = self.idx(row, col);
        if !self.observed[i] {
            self.observed[i] = true;
            if !self.reachable.is_empty() && self.reachable[i] {
                self.n_observed_reachable += 1;
            }
        }
    }

    /// Casts a ray from `from` in direction `angle`; returns the distance to
    /// the first wall within `max_range`, if any, and invokes `visit` for each
    /// traversed cell (walls included, as the final visit).
    pub fn raycast(
        &self,
        from: Point2,
        angle: f64,
        max_range: f64,
        mut visit: impl FnMut(u16, u16, CellKind),
    ) -> Option<f64> {
        let (sin, cos) = angle.sin_cos();
        let (mut row, mut col) = match self.cell_of(from) {
            Some(rc) => rc,
            None => return None,
        };
        // Amanatides-Woo grid traversal.
        let step_c: i32 = if cos > 0.0 { 1 } else { -1 };
        let step_r: i32 = if sin > 0.0 { 1 } else { -1 };
        let inv_dx = if cos.abs() < 1e-12 { f64::INFINITY } else { self.cell_size / cos.abs() };
        let inv_dy = if sin.abs() < 1e-12 { f64::INFINITY } else { self.cell_size / sin.abs() };
        let next_cx = if cos > 0.0 {
            (col as f64 + 1.0) * self.cell_size - from.x
        } else {
            from.x - col as f64 * self.cell_size
        };
        let next_cy = if sin > 0.0 {
            (row as f64 + 1.0) * self.cell_size - from.y
        } else {
            from.y - row as f64 * self.cell_size
        };
        let mut t_max_x = if inv_dx.is_infinite() { f64::INFINITY } else { next_cx / cos.abs() };
        let mut t_max_y = if inv_dy.is_infinite() { f64::INFINITY } else { next_cy / sin.abs() };

        let k = self.kind(row, col);
        visit(row, col, k);
        if k == CellKind::Wall {
            return Some(0.0);
        }
        loop {
            let t;
            if t_max_x < t_max_y {
                t = t_max_x;
                t_max_x += inv_dx;
                let nc = col as i32 + step_c;
                if nc < 0 || nc >= self.width as i32 {
                    return None;
                }
                col = nc as u16;
            } else {
                t = t_max_y;
                t_max_y += inv_dy;
                let nr = row as i32 + step_r;
                if nr < 0 || nr >= self.height as i32 {
                    return None;
                }
                row = nr as u16;
            }
            if t > max_range {
                return None;
            }
            let k = self.kind(row, col);
            visit(row, col, k);
            if k == CellKind::Wall {
                return Some(t);
            }
        }
    }

    /// Line of sight between two points: no wall cell on the segment.
    pub fn los(&self, a: Point2, b: Point2) -> bool {
        let d = b.sub(a);
        let range = d.norm();
        if range < 1e-9 {
            return true;
        }
        let angle = d.y.atan2(d.x);
        match self.raycast(a, angle, range, |_, _, _| {}) {
            None => true,
            Some(t) => t >= range,
        }
    }

    /// Performs a full 360-degree sweep from the agent's true pose, marking
    /// coverage and returning body-frame returns plus traversed cells.
    pub fn sense(&mut self, body: &AgentBody, rng: &mut impl Rng) -> Sweep {
        let mut sweep = Sweep::default();
        let pose = body.true_pose;
        let origin = pose.translation();
        let n_rays = (std::f64::consts::TAU / body.sweep_resolution).round() as usize;
        let normal = if body.range_sigma > 0.0 {
            Some(Normal::new(0.0, body.range_sigma).unwrap())
        } else {
            None
        };
        let mut seen_free: Vec<(u16, u16)> = Vec::new();
        let mut seen_walls: Vec<(u16, u16)> = Vec::new();
        for i in 0..n_rays {
            let local_angle = i as f64 * body.sweep_resolution;
            let world_angle = wrap_angle(pose.theta + local_angle);
            let hit = self.raycast(origin, world_angle, body.sensor_range, |r, c, k| {
                if k == CellKind::Wall {
                    seen_walls.push((r, c));
                } else {
                    seen_free.push((r, c));
                }
            });
            if let Some(dist) = hit {
                let noisy = match &normal {
                    Some(n) => (dist + n.sample(rng)).max(0.0),
                    None => dist,
                };
                sweep
                    .points
                    .push(Point2::new(noisy * local_angle.cos(), noisy * local_angle.sin()));
            } else {
                sweep.misses.push(local_angle);
            }
        }
        seen_free.sort_unstable();
        seen_free.dedup();
        seen_walls.sort_unstable();
        seen_walls.dedup();
        for &(r, c) in &seen_free {
            self.mark_observed(r, c);
        }
        for &(r, c) in &seen_walls {
            self.mark_observed(r, c);
        }
        sweep.seen_free = seen_free;
        sweep.seen_walls = seen_walls;
        sweep
    }
}

/// Result of a motion attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveResult {
    Moved,
    Blocked,
}

/// Dynamic state of one platform.
#[derive(Debug, Clone)]
pub struct AgentBody {
    pub id: AgentId,
    pub kind: AgentKind,
    pub speed: f64,
    pub passage_width: f64,
    pub sensor_range: f64,
    pub range_sigma: f64,
    pub sweep_resolution: f64,
    pub drift_sigma_xy: f64,
    pub drift_sigma_theta: f64,
    pub true_pose: Pose2,
    /// Accumulated odometry error (world-frame offsets plus heading).
    pub drift: Pose2,
    pub blocked_ticks: u32,
    pub distance_traveled: f64,
    /// Inactive bodies (e.g. a carried UAV before launch) do not move or sense.
    pub active: bool,
    pub carrying: Option<AgentId>,
}

impl AgentBody {
    pub fn new(id: AgentId, kind: AgentKind, start: Pose2) -> Self {
        AgentBody {
            id,
            kind,
            speed: kind.default_speed(),
            passage_width: kind.default_passage_width(),
            sensor_range: DEFAULT_SENSOR_RANGE,
            range_sigma: DEFAULT_RANGE_SIGMA,
            sweep_resolution: DEFAULT_SWEEP_RESOLUTION,
            drift_sigma_xy: DEFAULT_DRIFT_SIGMA_XY,
            drift_sigma_theta: DEFAULT_DRIFT_SIGMA_THETA,
            true_pose: start,
            drift: Pose2::identity(),
            blocked_ticks: 0,
            distance_traveled: 0.0,
            active: true,
            carrying: None,
        }
    }

    /// The pose the agent believes it has: truth perturbed by accumulated
    /// drift. With zero noise configured this equals the true pose.
    pub fn odom_pose(&self) -> Pose2 {
        Pose2::new(
            self.true_pose.x + self.drift.x,
            self.true_pose.y + self.drift.y,
            wrap_angle(self.true_pose.theta + self.drift.theta),
        )
    }

    /// Accumulates odometry drift for a motion of length `dist`: independent
    /// diffusion in position and heading, variance linear in distance.
    fn accumulate_drift(&mut self, dist: f64, rng: &mut impl Rng) {
        if dist <= 0.0 {
            return;
        }
        if self.drift_sigma_xy > 0.0 {
            let n = Normal::new(0.0, self.drift_sigma_xy * dist.sqrt()).unwrap();
            self.drift.x += n.sample(rng);
            self.drift.y += n.sample(rng);
        }
        if self.drift_sigma_theta > 0.0 {
            let n = Normal::new(0.0, self.drift_sigma_theta * dist.sqrt()).unwrap();
            self.drift.theta = wrap_angle(self.drift.theta + n.sample(rng));
        }
    }

    /// Attempts to move along `dir` (need not be normalized) for one step of
    /// `dt` seconds at the platform speed. Heading follows the motion
    /// direction. Blocked motion leaves the pose unchanged and counts toward
    /// navigation failure.
    pub fn try_move(
        &mut self,
        world: &GridWorld,
        dir: Point2,
        dt: f64,
        rng: &mut impl Rng,
    ) -> MoveResult {
        let norm = dir.norm();
        if norm < 1e-9 || !self.active {
            return MoveResult::Moved;
        }
        let step = self.speed * dt;
        let unit = dir.scale(1.0 / norm);
        let dist = step.min(norm);
        let next = Point2::new(self.true_pose.x + unit.x * dist, self.true_pose.y + unit.y * dist);
        let ok = match world.cell_of(next) {
            Some((r, c)) => world.traversable(r, c, self.kind, self.passage_width),
            None => false,
        };
        if !ok {
            self.blocked_ticks += 1;
            return MoveResult::Blocked;
        }
        self.blocked_ticks = 0;
        self.true_pose.x = next.x;
        self.true_pose.y = next.y;
        self.true_pose.theta = unit.y.atan2(unit.x);
        self.distance_traveled += dist;
        self.accumulate_drift(dist, rng);
        MoveResult::Moved
    }
}

/// Exact squared Euclidean distance transform (Felzenszwalb), distances in
/// cell units to the nearest obstacle cell center.
fn edt_squared(width: usize, height: usize, obstacle: &[bool]) -> Vec<f64> {
    const INF: f64 = 1e18;
    let mut grid = vec![INF; width * height];
    for (i, &o) in obstacle.iter().enumerate() {
        if o {
            grid[i] = 0.0;
        }
    }
    let max_dim = width.max(height);
    let mut f = vec![0.0f64; max_dim];
    let mut d = vec![0.0f64; max_dim];
    let mut v = vec![0usize; max_dim];
    let mut z = vec![0.0f64; max_dim + 1];

    let dt_1d = |f: &[f64], n: usize, d: &mut [f64], v: &mut [usize], z: &mut [f64]| {
        let mut k = 0usize;
        v[0] = 0;
        z[0] = -INF;
        z[1] = INF;
        for q in 1..n {
            loop {
                let s = ((f[q] + (q * q) as f64) - (f[v[k]] + (v[k] * v[k]) as f64))
                    / (2.0 * q as f64 - 2.0 * v[k] as f64);
                if s <= z[k] {
                    if k == 0 {
                        v[0] = q;
                        z[0] = -INF;
                        z[1] = INF;
                        break;
                    }
                    k -= 1;
                } else {
                    k += 1;
                    v[k] = q;
                    z[k] = s;
                    z[k + 1] = INF;
                    break;
                }
            }
        }
        let mut k = 0usize;
        for q in 0..n {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let dq = q as f64 - v[k] as f64;
            d[q] = dq * dq + f[v[k]];
        }
    };

    // Columns.
    for c in 0..width {
        for r in 0..height {
            f[r] = grid[r * width + c];
        }
        dt_1d(&f, height, &mut d, &mut v, &mut z);
        for r in 0..height {
            grid[r * width + c] = d[r];
        }
    }
    // Rows.
    for r in 0..height {
        f[..width].copy_from_slice(&grid[r * width..(r + 1) * width]);
        dt_1d(&f, width, &mut d, &mut v, &mut z);
        grid[r * width..(r + 1) * width].copy_from_slice(&d[..width]);
    }
    grid
}

/// Computes the clearance map: for each cell, the inscribed free-space
/// width, twice the distance from the cell center to the nearest wall face
/// or grid border, capped at [`CLEARANCE_CAP`]. Walls get zero.
pub(crate) fn compute_clearance(
    width: u16,
    height: u16,
    cell_size: f64,
    cells: &[CellKind],
) -> Vec<f64> {
    let w = width as usize;
    let h = height as usize;
    let obstacle: Vec<bool> = cells.iter().map(|&k| k == CellKind::Wall).collect();
    let d2 = edt_squared(w, h, &obstacle);
    let cap_r = CLEARANCE_CAP / 2.0;
    let win = (cap_r / cell_size).ceil() as i64 + 1;
    let mut clearance = vec![0.0f64; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if obstacle[i] {
                continue;
            }
            let to_border =
                ((r.min(h - 1 - r).min(c).min(w - 1 - c)) as f64 + 0.5) * cell_size;
            let mut best = cap_r.min(to_border);
            // Wall-face distance differs from the center EDT by at most a
            // half diagonal, which prunes the exact scan to cells near walls.
            let lower = (d2[i].sqrt() - std::f64::consts::FRAC_1_SQRT_2) * cell_size;
            if lower < best {
                for dr in -win..=win {
                    let rr = r as i64 + dr;
                    if rr < 0 || rr >= h as i64 {
                        continue;
                    }
                    for dc in -win..=win {
                        let cc = c as i64 + dc;
                        if cc < 0 || cc >= w as i64 {
                            continue;
                        }
                        if obstacle[rr as usize * w + cc as usize] {
                            let gr = (dr.abs() as f64 - 0.5).max(0.0);
                            let gc = (dc.abs() as f64 - 0.5).max(0.0);
                            best = best.min(gr.hypot(gc) * cell_size);
                        }
                    }
                }
            }
            clearance[i] = 2.0 * best;
        }
    }
    clearance
}
