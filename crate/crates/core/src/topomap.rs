//! Topometric navigation over per-frame costmap submaps.
//!
//! Every mapping frame anchors a 20 m square cost grid that all agents merge
//! their costmap bundles into. Each grid is segmented into supercells
//! (compact regions of similar cost), supercells within a submap link where
//! they touch, submaps of different frames link where their cells overlap
//! under the current frame poses, and routes are shortest-time searches over
//! the combined graph.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use crate::geom::{Point2, Pose2};
use crate::types::{AgentKind, FrameId, SupercellId};
use crate::wire::{Reader, Writer, WireError};
use crate::world::{self, CellKind};

/// Submap cell edge length, meters.
pub const CELL_SIZE: f64 = 0.25;
/// Submap side length in cells (20 m extent centered on the frame origin).
pub const SUBMAP_CELLS: usize = 80;
/// A cell joins a region only while its cost stays this close to the mean.
pub const COST_BAND: f64 = 0.5;
/// Upper bound on the distance between any two member cells of a supercell.
pub const SUPERCELL_DIAMETER: f64 = 5.0;
/// Inter-frame edges are rebuilt when the relative pose moves this far.
pub const REBUILD_TRANS_EPS: f64 = 0.1;
/// Rotation counterpart of [`REBUILD_TRANS_EPS`], radians.
pub const REBUILD_ROT_EPS: f64 = 1.0 * std::f64::consts::PI / 180.0;
/// Cells of different submaps count as overlapping within this distance.
pub const INTERSECT_RADIUS: f64 = 0.25;
/// Start and goal points must land within this distance of a supercell.
pub const ATTACH_RADIUS: f64 = 2.0;

const HALF_CELLS: i32 = SUBMAP_CELLS as i32 / 2;
const N_CELLS: usize = SUBMAP_CELLS * SUBMAP_CELLS;
const UNASSIGNED: u16 = u16::MAX;

/// Knowledge state of one submap cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellState {
    Unobserved,
    /// Observed and passable, with a traversal cost of at least 1.
    Traversable(f64),
    Fatal,
}

impl CellState {
    fn to_byte(self) -> u8 {
        match self {
            CellState::Unobserved => 0,
            CellState::Fatal => 255,
            CellState::Traversable(c) => (c * 10.0).round().clamp(1.0, 254.0) as u8,
        }
    }

    fn from_byte(v: u8) -> CellState {
        match v {
            0 => CellState::Unobserved,
            255 => CellState::Fatal,
            v => CellState::Traversable(v as f64 / 10.0),
        }
    }

    /// Precedence merge: Fatal beats Traversable beats Unobserved, and two
    /// cost observations keep the cheaper one.
    fn merge(self, other: CellState) -> CellState {
        match (self, other) {
            (CellState::Fatal, _) | (_, CellState::Fatal) => CellState::Fatal,
            (CellState::Unobserved, x) | (x, CellState::Unobserved) => x,
            (CellState::Traversable(a), CellState::Traversable(b)) => {
                CellState::Traversable(a.min(b))
            }
        }
    }
}

/// A rectangular patch of observed cells, positioned relative to the origin
/// of the frame it was built in. This is the unit agents exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct CostmapBundle {
    pub frame: FrameId,
    pub width: u16,
    pub height: u16,
    /// Column of the patch's first cell, in cells from the frame origin.
    pub origin_col: i16,
    /// Row of the patch's first cell, in cells from the frame origin.
    pub origin_row: i16,
    /// Row-major, `width * height` entries.
    pub cells: Vec<CellState>,
}

impl CostmapBundle {
    pub fn size_bytes(&self) -> usize {
        14 + self.cells.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(self.size_bytes());
        w.u16(self.frame.agent.0);
        w.u32(self.frame.seq);
        w.u16(self.width);
        w.u16(self.height);
        w.i16(self.origin_col);
        w.i16(self.origin_row);
        for &c in &self.cells {
            w.u8(c.to_byte());
        }
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<CostmapBundle, WireError> {
        let mut r = Reader::new(buf);
        let frame = FrameId::new(crate::types::AgentId(r.u16()?), r.u32()?);
        let width = r.u16()?;
        let height = r.u16()?;
        let origin_col = r.i16()?;
        let origin_row = r.i16()?;
        let n = width as usize * height as usize;
        let raw = r.bytes(n)?;
        let cells = raw.iter().map(|&b| CellState::from_byte(b)).collect();
        r.expect_end()?;
        Ok(CostmapBundle {
            frame,
            width,
            height,
            origin_col,
            origin_row,
            cells,
        })
    }
}

/// Cost grid anchored to one frame, 20 m square around the frame origin.
#[derive(Debug, Clone)]
pub struct Submap {
    root_frame: FrameId,
    cells: Vec<CellState>,
}

impl Submap {
    pub fn new(root_frame: FrameId) -> Submap {
        Submap {
            root_frame,
            cells: vec![CellState::Unobserved; N_CELLS],
        }
    }

    pub fn root_frame(&self) -> FrameId {
        self.root_frame
    }

    pub fn state(&self, row: usize, col: usize) -> CellState {
        self.cells[row * SUBMAP_CELLS + col]
    }

    /// Center of a cell in frame-local coordinates.
    pub fn cell_center(row: usize, col: usize) -> Point2 {
        Point2::new(
            (col as f64 - HALF_CELLS as f64 + 0.5) * CELL_SIZE,
            (row as f64 - HALF_CELLS as f64 + 0.5) * CELL_SIZE,
        )
    }

    /// Cell containing a frame-local point, or None when outside the extent.
    pub fn cell_of(p: Point2) -> Option<(usize, usize)> {
        let col = (p.x / CELL_SIZE).floor() as i64 + HALF_CELLS as i64;
        let row = (p.y / CELL_SIZE).floor() as i64 + HALF_CELLS as i64;
        if row < 0 || col < 0 || row >= SUBMAP_CELLS as i64 || col >= SUBMAP_CELLS as i64 {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }

    /// Folds a bundle in, cell by cell. Merging is idempotent and order
    /// independent. Returns whether anything changed.
    pub fn merge(&mut self, bundle: &CostmapBundle) -> bool {
        let mut changed = false;
        for br in 0..bundle.height as i32 {
            for bc in 0..bundle.width as i32 {
                let row = bundle.origin_row as i32 + br + HALF_CELLS;
                let col = bundle.origin_col as i32 + bc + HALF_CELLS;
                if row < 0 || col < 0 || row >= SUBMAP_CELLS as i32 || col >= SUBMAP_CELLS as i32 {
                    continue;
                }
                let incoming = bundle.cells[(br * bundle.width as i32 + bc) as usize];
                let slot = &mut self.cells[row as usize * SUBMAP_CELLS + col as usize];
                let merged = slot.merge(incoming);
                if merged != *slot {
                    *slot = merged;
                    changed = true;
                }
            }
        }
        changed
    }

    pub fn n_traversable(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c, CellState::Traversable(_)))
            .count()
    }
}

/// Compact region of similar-cost traversable cells within one submap.
#[derive(Debug, Clone)]
pub struct Supercell {
    pub id: SupercellId,
    /// Member cells as (row, col), ascending.
    pub members: Vec<(u8, u8)>,
    /// Mean of member cell centers, frame-local.
    pub centroid: Point2,
    pub mean_cost: f64,
}

/// Edge between two supercells of the same submap.
#[derive(Debug, Clone, Copy)]
pub struct SubEdge {
    pub a: u16,
    pub b: u16,
    /// Widest body that can travel centroid to centroid staying inside the
    /// two supercells, meters.
    pub width: f64,
}

/// Segmentation result for one submap.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub frame: FrameId,
    pub supercells: Vec<Supercell>,
    pub edges: Vec<SubEdge>,
    owner: Vec<u16>,
    clearance: Vec<f64>,
}

impl Subgraph {
    /// Supercell index owning a cell, if any.
    pub fn owner(&self, row: usize, col: usize) -> Option<u16> {
        let o = self.owner[row * SUBMAP_CELLS + col];
        (o != UNASSIGNED).then_some(o)
    }
}

/// Deterministic region growing. Seeds scan in (row, col) order; a region
/// absorbs 4-neighbors whose cost stays within [`COST_BAND`] of the running
/// mean while the bounding box keeps the diameter within
/// [`SUPERCELL_DIAMETER`]. The box cap is per axis, which yields square
/// blocks in open space and keeps centroid chains straight.
pub fn segment(submap: &Submap) -> Subgraph {
    let max_span = (SUPERCELL_DIAMETER / (CELL_SIZE * std::f64::consts::SQRT_2)) as usize;
    let kinds: Vec<CellKind> = submap
        .cells
        .iter()
        .map(|c| match c {
            CellState::Traversable(_) => CellKind::Free,
            _ => CellKind::Wall,
        })
        .collect();
    let clearance = world::compute_clearance(
        SUBMAP_CELLS as u16,
        SUBMAP_CELLS as u16,
        CELL_SIZE,
        &kinds,
    );

    let cost_of = |idx: usize| match submap.cells[idx] {
        CellState::Traversable(c) => Some(c),
        _ => None,
    };

    let mut owner = vec![UNASSIGNED; N_CELLS];
    let mut supercells: Vec<Supercell> = Vec::new();
    for seed in 0..N_CELLS {
        let Some(seed_cost) = cost_of(seed) else { continue };
        if owner[seed] != UNASSIGNED {
            continue;
        }
        let sid = supercells.len() as u16;
        let (sr, sc) = (seed / SUBMAP_CELLS, seed % SUBMAP_CELLS);
        let mut members = vec![(sr as u8, sc as u8)];
        let mut sum = seed_cost;
        let (mut min_r, mut max_r, mut min_c, mut max_c) = (sr, sr, sc, sc);
        owner[seed] = sid;
        let mut queue = VecDeque::from([(sr, sc)]);
        while let Some((r, c)) = queue.pop_front() {
            for (dr, dc) in [(-1i32, 0i32), (0, -1), (0, 1), (1, 0)] {
                let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                if nr < 0 || nc < 0 || nr >= SUBMAP_CELLS as i32 || nc >= SUBMAP_CELLS as i32 {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                let nidx = nr * SUBMAP_CELLS + nc;
                if owner[nidx] != UNASSIGNED {
                    continue;
                }
                let Some(cost) = cost_of(nidx) else { continue };
                let mean = sum / members.len() as f64;
                if (cost - mean).abs() > COST_BAND + 1e-9 {
                    continue;
                }
                let span_r = max_r.max(nr) - min_r.min(nr);
                let span_c = max_c.max(nc) - min_c.min(nc);
                if span_r > max_span || span_c > max_span {
                    continue;
                }
                owner[nidx] = sid;
                members.push((nr as u8, nc as u8));
                sum += cost;
                min_r = min_r.min(nr);
                max_r = max_r.max(nr);
                min_c = min_c.min(nc);
                max_c = max_c.max(nc);
                queue.push_back((nr, nc));
            }
        }
        members.sort_unstable();
        let n = members.len() as f64;
        let centroid = members
            .iter()
            .fold(Point2::ZERO, |acc, &(r, c)| {
                acc.add(Submap::cell_center(r as usize, c as usize))
            })
            .scale(1.0 / n);
        supercells.push(Supercell {
            id: SupercellId {
                frame: submap.root_frame,
                index: sid,
            },
            members,
            centroid,
            mean_cost: sum / n,
        });
    }

    let mut graph = Subgraph {
        frame: submap.root_frame,
        supercells,
        edges: Vec::new(),
        owner,
        clearance,
    };

    // Touching supercells get an edge whose width is the bottleneck of the
    // widest centroid-to-centroid path through the pair, so a narrow throat
    // anywhere between the waypoints gates the hop.
    let mut pairs: BTreeSet<(u16, u16)> = BTreeSet::new();
    for r in 0..SUBMAP_CELLS as i32 {
        for c in 0..SUBMAP_CELLS as i32 {
            let Some(a) = graph_owner(&graph, r, c) else { continue };
            for (dr, dc) in [(0i32, 1i32), (1, -1), (1, 0), (1, 1)] {
                if let Some(b) = graph_owner(&graph, r + dr, c + dc) {
                    if a != b {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
    }
    for (a, b) in pairs {
        let width = intra_edge_width(&graph, a, b);
        if width > 0.0 {
            graph.edges.push(SubEdge { a, b, width });
        }
    }
    graph
}

fn graph_owner(g: &Subgraph, r: i32, c: i32) -> Option<u16> {
    if r < 0 || c < 0 || r >= SUBMAP_CELLS as i32 || c >= SUBMAP_CELLS as i32 {
        return None;
    }
    let o = g.owner[r as usize * SUBMAP_CELLS + c as usize];
    (o != UNASSIGNED).then_some(o)
}

/// Member cell closest to the supercell's centroid, as a grid index.
fn centroid_cell(g: &Subgraph, idx: u16) -> usize {
    let sc = &g.supercells[idx as usize];
    let mut best = (f64::INFINITY, 0usize);
    for &(r, c) in &sc.members {
        let d = Submap::cell_center(r as usize, c as usize).dist(sc.centroid);
        let i = r as usize * SUBMAP_CELLS + c as usize;
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Maximin clearance over 8-connected paths between the centroid cells of
/// two supercells, restricted to their member cells.
fn intra_edge_width(g: &Subgraph, a: u16, b: u16) -> f64 {
    let start = centroid_cell(g, a);
    let target = centroid_cell(g, b);
    let allowed = |idx: usize| {
        let o = g.owner[idx];
        o == a || o == b
    };
    let mut best = vec![0.0f64; N_CELLS];
    let mut heap: BinaryHeap<(u64, usize)> = BinaryHeap::new();
    best[start] = g.clearance[start];
    heap.push((best[start].to_bits(), start));
    while let Some((bits, i)) = heap.pop() {
        let w = f64::from_bits(bits);
        if w < best[i] {
            continue;
        }
        if i == target {
            return w;
        }
        let (r, c) = ((i / SUBMAP_CELLS) as i32, (i % SUBMAP_CELLS) as i32);
        for dr in -1i32..=1 {
            for dc in -1i32..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= SUBMAP_CELLS as i32 || nc >= SUBMAP_CELLS as i32 {
                    continue;
                }
                let j = nr as usize * SUBMAP_CELLS + nc as usize;
                if !allowed(j) {
                    continue;
                }
                let nw = w.min(g.clearance[j]);
                if nw > best[j] {
                    best[j] = nw;
                    heap.push((nw.to_bits(), j));
                }
            }
        }
    }
    0.0
}

/// Edge between supercells of different submaps, valid for the relative
/// pose it was built under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterEdge {
    pub a: SupercellId,
    pub b: SupercellId,
    pub width: f64,
}

#[derive(Debug, Clone)]
struct InterBlock {
    rel: Pose2,
    edges: Vec<InterEdge>,
}

/// Counts of work done by one [`TopoMap::rebuild`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RebuildStats {
    pub resegmented: usize,
    pub pairs_recomputed: usize,
}

/// Shortest-time route over the supercell graph.
#[derive(Debug, Clone)]
pub struct Route {
    pub vertices: Vec<SupercellId>,
    /// Supercell centroids in global coordinates, ending at the goal point.
    pub waypoints: Vec<Point2>,
    pub seconds: f64,
}

/// One agent's merged view of all submaps plus the derived graph.
#[derive(Debug, Clone)]
pub struct TopoMap {
    /// Exponent applied to mean costs when weighting edges. 1.0 keeps costs
    /// linear; larger values penalize rough terrain harder.
    pub cost_exponent: f64,
    submaps: BTreeMap<FrameId, Submap>,
    graphs: BTreeMap<FrameId, Subgraph>,
    dirty: BTreeSet<FrameId>,
    inter: BTreeMap<(FrameId, FrameId), InterBlock>,
}

impl Default for TopoMap {
    fn default() -> Self {
        TopoMap::new()
    }
}

impl TopoMap {
    pub fn new() -> TopoMap {
        TopoMap {
            cost_exponent: 1.0,
            submaps: BTreeMap::new(),
            graphs: BTreeMap::new(),
            dirty: BTreeSet::new(),
            inter: BTreeMap::new(),
        }
    }

    pub fn submap(&self, frame: FrameId) -> Option<&Submap> {
        self.submaps.get(&frame)
    }

    pub fn subgraph(&self, frame: FrameId) -> Option<&Subgraph> {
        self.graphs.get(&frame)
    }

    pub fn frames(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.submaps.keys().copied()
    }

    /// All inter-frame edges currently cached, in deterministic order.
    pub fn inter_edges(&self) -> impl Iterator<Item = &InterEdge> + '_ {
        self.inter.values().flat_map(|b| b.edges.iter())
    }

    /// Folds a costmap bundle into the submap of its frame, creating the
    /// submap on first contact. Returns whether any cell changed.
    pub fn merge_costmap(&mut self, bundle: &CostmapBundle) -> bool {
        let submap = self
            .submaps
            .entry(bundle.frame)
            .or_insert_with(|| Submap::new(bundle.frame));
        let changed = submap.merge(bundle);
        if changed {
            self.dirty.insert(bundle.frame);
        }
        changed
    }

    /// Re-segments changed submaps and refreshes inter-frame edges, but only
    /// for frame pairs whose relative pose moved more than
    /// [`REBUILD_TRANS_EPS`] or [`REBUILD_ROT_EPS`] since the last build.
    pub fn rebuild(&mut self, poses: &BTreeMap<FrameId, Pose2>) -> RebuildStats {
        let mut stats = RebuildStats::default();
        let dirty: Vec<FrameId> = std::mem::take(&mut self.dirty).into_iter().collect();
        for frame in dirty {
            let submap = &self.submaps[&frame];
            if submap.n_traversable() > 0 {
                self.graphs.insert(frame, segment(submap));
            } else {
                self.graphs.remove(&frame);
            }
            stats.resegmented += 1;
            self.inter.retain(|&(a, b), _| a != frame && b != frame);
        }

        let placed: Vec<FrameId> = self
            .graphs
            .keys()
            .filter(|f| poses.contains_key(f))
            .copied()
            .collect();
        // Two 20 m submaps cannot overlap once their origins are farther
        // apart than the sum of their circumradii.
        let reach = 2.0 * (SUBMAP_CELLS as f64 * CELL_SIZE) * std::f64::consts::SQRT_2 / 2.0
            + INTERSECT_RADIUS;
        let mut live: BTreeSet<(FrameId, FrameId)> = BTreeSet::new();
        for (i, &fa) in placed.iter().enumerate() {
            for &fb in &placed[i + 1..] {
                let (pa, pb) = (poses[&fa], poses[&fb]);
                if pa.trans_dist(pb) > reach {
                    continue;
                }
                let rel = pa.between(pb);
                live.insert((fa, fb));
                let fresh = match self.inter.get(&(fa, fb)) {
                    Some(block) => {
                        block.rel.trans_dist(rel) > REBUILD_TRANS_EPS
                            || block.rel.rot_dist(rel) > REBUILD_ROT_EPS
                    }
                    None => true,
                };
                if fresh {
                    let edges = intersect_edges(&self.graphs[&fa], &self.graphs[&fb], rel);
                    self.inter.insert((fa, fb), InterBlock { rel, edges });
                    stats.pairs_recomputed += 1;
                }
            }
        }
        self.inter.retain(|key, _| live.contains(key));
        stats
    }

    /// Shortest-time route using the platform's default width and speed.
    pub fn plan(
        &self,
        poses: &BTreeMap<FrameId, Pose2>,
        start: Point2,
        goal: Point2,
        kind: AgentKind,
    ) -> Option<Route> {
        self.plan_with(
            poses,
            start,
            goal,
            kind.default_passage_width(),
            kind.default_speed(),
        )
    }

    /// Shortest-time route for an explicit body width and speed. Edges and
    /// pass-through supercells narrower than the width are inadmissible.
    /// Returns None when start or goal cannot attach or no path fits.
    pub fn plan_with(
        &self,
        poses: &BTreeMap<FrameId, Pose2>,
        start: Point2,
        goal: Point2,
        width: f64,
        speed: f64,
    ) -> Option<Route> {
        if speed <= 0.0 {
            return None;
        }
        let e = self.cost_exponent;
        let fits = |clear: f64| clear + 1e-9 >= width;

        type VKey = (FrameId, u16);
        struct Vert {
            centroid: Point2,
            cost: f64,
        }
        let mut verts: BTreeMap<VKey, Vert> = BTreeMap::new();
        for (&frame, graph) in &self.graphs {
            let Some(&pose) = poses.get(&frame) else { continue };
            for sc in &graph.supercells {
                verts.insert(
                    (frame, sc.id.index),
                    Vert {
                        centroid: pose.transform(sc.centroid),
                        cost: sc.mean_cost.powf(e),
                    },
                );
            }
        }
        if verts.is_empty() {
            return None;
        }

        let mut adj: BTreeMap<VKey, Vec<(VKey, f64)>> = BTreeMap::new();
        let mut connect = |a: VKey, b: VKey, edge_width: f64| {
            if !fits(edge_width) {
                return;
            }
            adj.entry(a).or_default().push((b, edge_width));
            adj.entry(b).or_default().push((a, edge_width));
        };
        for (&frame, graph) in &self.graphs {
            if !poses.contains_key(&frame) {
                continue;
            }
            for edge in &graph.edges {
                connect((frame, edge.a), (frame, edge.b), edge.width);
            }
        }
        for block in self.inter.values() {
            for edge in &block.edges {
                let (a, b) = (
                    (edge.a.frame, edge.a.index),
                    (edge.b.frame, edge.b.index),
                );
                if verts.contains_key(&a) && verts.contains_key(&b) {
                    connect(a, b, edge.width);
                }
            }
        }

        // Rigid transforms preserve distances, so proximity of a point to a
        // supercell's member cells can be measured in frame-local space.
        let region_dist = |sc: &Supercell, local: Point2| {
            sc.members
                .iter()
                .map(|&(r, c)| Submap::cell_center(r as usize, c as usize).dist(local))
                .fold(f64::INFINITY, f64::min)
        };

        // Attachment goes by proximity to a supercell's region. Width limits
        // apply to edges between supercells, not to standing at a vertex.
        let mut terminals: BTreeMap<VKey, f64> = BTreeMap::new();
        let mut sources: Vec<(VKey, f64)> = Vec::new();
        for (&frame, graph) in &self.graphs {
            let Some(&pose) = poses.get(&frame) else { continue };
            let goal_local = pose.untransform(goal);
            let start_local = pose.untransform(start);
            for sc in &graph.supercells {
                let key = (frame, sc.id.index);
                if region_dist(sc, goal_local) <= ATTACH_RADIUS + 1e-9 {
                    let leg = verts[&key].centroid.dist(goal) * verts[&key].cost / speed;
                    terminals.insert(key, leg);
                }
                if region_dist(sc, start_local) <= ATTACH_RADIUS + 1e-9 {
                    let attach = verts[&key].centroid.dist(start) * verts[&key].cost / speed;
                    sources.push((key, attach));
                }
            }
        }
        if terminals.is_empty() {
            return None;
        }

        let mut dist: BTreeMap<VKey, f64> = BTreeMap::new();
        let mut prev: BTreeMap<VKey, VKey> = BTreeMap::new();
        let mut heap: BinaryHeap<std::cmp::Reverse<(u64, VKey)>> = BinaryHeap::new();
        let mut best: Option<(f64, VKey)> = None;
        for &(key, attach) in &sources {
            if dist.get(&key).map_or(true, |&d0| attach < d0) {
                dist.insert(key, attach);
                heap.push(std::cmp::Reverse((attach.to_bits(), key)));
            }
        }

        while let Some(std::cmp::Reverse((bits, u))) = heap.pop() {
            let du = f64::from_bits(bits);
            if dist.get(&u) != Some(&du) {
                continue;
            }
            if let Some(&leg) = terminals.get(&u) {
                let total = du + leg;
                if best.map_or(true, |(b, _)| total < b) {
                    best = Some((total, u));
                }
            }
            let Some(neighbors) = adj.get(&u) else { continue };
            for &(v, _) in neighbors {
                let vert = &verts[&v];
                let step = verts[&u].centroid.dist(vert.centroid)
                    * (verts[&u].cost + vert.cost)
                    / 2.0
                    / speed;
                let dv = du + step;
                if dist.get(&v).map_or(true, |&d0| dv < d0) {
                    dist.insert(v, dv);
                    prev.insert(v, u);
                    heap.push(std::cmp::Reverse((dv.to_bits(), v)));
                }
            }
        }

        let (seconds, terminal) = best?;
        let mut chain = vec![terminal];
        let mut cur = terminal;
        while let Some(&p) = prev.get(&cur) {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        let vertices: Vec<SupercellId> = chain
            .iter()
            .map(|&(frame, index)| SupercellId { frame, index })
            .collect();
        let mut waypoints: Vec<Point2> = chain.iter().map(|k| verts[k].centroid).collect();
        if waypoints.last().map_or(true, |w| w.dist(goal) > 1e-9) {
            waypoints.push(goal);
        }
        Some(Route {
            vertices,
            waypoints,
            seconds,
        })
    }
}

/// Overlap edges between two subgraphs under the relative pose taking
/// frame-b local points into frame a. Supercell pairs whose member cells
/// come within [`INTERSECT_RADIUS`] get an edge; its width is the maximin
/// clearance path between the two centroid cells through the union of both
/// supercells, crossing frames anywhere the cells overlap.
fn intersect_edges(ga: &Subgraph, gb: &Subgraph, rel: Pose2) -> Vec<InterEdge> {
    let bin = |v: f64| (v / INTERSECT_RADIUS).floor() as i64;
    let mut grid: BTreeMap<(i64, i64), Vec<(u16, usize)>> = BTreeMap::new();
    for sc in &ga.supercells {
        for &(r, c) in &sc.members {
            let idx = r as usize * SUBMAP_CELLS + c as usize;
            let p = Submap::cell_center(r as usize, c as usize);
            grid.entry((bin(p.x), bin(p.y)))
                .or_default()
                .push((sc.id.index, idx));
        }
    }
    // Cross links per touching supercell pair, as (a cell, b cell) indices.
    let mut links: BTreeMap<(u16, u16), Vec<(usize, usize)>> = BTreeMap::new();
    for sc in &gb.supercells {
        for &(r, c) in &sc.members {
            let idx = r as usize * SUBMAP_CELLS + c as usize;
            let p = rel.transform(Submap::cell_center(r as usize, c as usize));
            let (bx, by) = (bin(p.x), bin(p.y));
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(cands) = grid.get(&(bx + dx, by + dy)) else { continue };
                    for &(ia, aidx) in cands {
                        let (ar, ac) = (aidx / SUBMAP_CELLS, aidx % SUBMAP_CELLS);
                        if Submap::cell_center(ar, ac).dist(p) <= INTERSECT_RADIUS + 1e-9 {
                            links
                                .entry((ia, sc.id.index))
                                .or_default()
                                .push((aidx, idx));
                        }
                    }
                }
            }
        }
    }
    links
        .into_iter()
        .filter_map(|((ia, ib), cross)| {
            let w = inter_edge_width(ga, ia, gb, ib, &cross);
            (w > 0.0).then(|| InterEdge {
                a: SupercellId {
                    frame: ga.frame,
                    index: ia,
                },
                b: SupercellId {
                    frame: gb.frame,
                    index: ib,
                },
                width: w,
            })
        })
        .collect()
}

/// Maximin clearance path from a's centroid cell to b's centroid cell over
/// the union of the two supercells. Nodes of b live at an index offset;
/// `cross` lists the places a body may change frames.
fn inter_edge_width(
    ga: &Subgraph,
    ia: u16,
    gb: &Subgraph,
    ib: u16,
    cross: &[(usize, usize)],
) -> f64 {
    let mut hop: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(aidx, bidx) in cross {
        hop.entry(aidx).or_default().push(N_CELLS + bidx);
        hop.entry(N_CELLS + bidx).or_default().push(aidx);
    }
    let side = |node: usize| -> (&Subgraph, u16, usize) {
        if node < N_CELLS {
            (ga, ia, node)
        } else {
            (gb, ib, node - N_CELLS)
        }
    };
    let clear = |node: usize| {
        let (g, _, idx) = side(node);
        g.clearance[idx]
    };
    let start = centroid_cell(ga, ia);
    let target = N_CELLS + centroid_cell(gb, ib);
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    let mut heap: BinaryHeap<(u64, usize)> = BinaryHeap::new();
    best.insert(start, clear(start));
    heap.push((clear(start).to_bits(), start));
    while let Some((bits, node)) = heap.pop() {
        let w = f64::from_bits(bits);
        if best.get(&node) != Some(&w) {
            continue;
        }
        if node == target {
            return w;
        }
        let (g, own, idx) = side(node);
        let offset = node - idx;
        let (r, c) = ((idx / SUBMAP_CELLS) as i32, (idx % SUBMAP_CELLS) as i32);
        let push = |j: usize, heap: &mut BinaryHeap<(u64, usize)>,
                    best: &mut BTreeMap<usize, f64>| {
            let nw = w.min(clear(j));
            if best.get(&j).map_or(true, |&b| nw > b) {
                best.insert(j, nw);
                heap.push((nw.to_bits(), j));
            }
        };
        for dr in -1i32..=1 {
            for dc in -1i32..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= SUBMAP_CELLS as i32 || nc >= SUBMAP_CELLS as i32 {
                    continue;
                }
                let jidx = nr as usize * SUBMAP_CELLS + nc as usize;
                if g.owner[jidx] == own {
                    push(offset + jidx, &mut heap, &mut best);
                }
            }
        }
        if let Some(far) = hop.get(&node) {
            for &j in far {
                push(j, &mut heap, &mut best);
            }
        }
    }
    0.0
}
