//! Visibility-based frontier detection and cross-viewpoint culling.
//!
//! Visibility uses the hidden-point-removal construction: sensed points plus
//! a supplementary circle at maximum range are sphere-flipped around the
//! observer and the convex hull of the flipped set marks the visible points.
//! Visible supplementary points are unknown space at range (max-range
//! frontiers); long hull edges between real points are depth discontinuities
//! (opening frontiers).

use crate::geom::{Point2, Pose2};
use crate::types::{AgentId, FrameId, FrontierId};
use crate::wire::{Reader, WireError, Writer};
use std::collections::{BTreeMap, BTreeSet};

/// Angular spacing of supplementary max-range points, degrees.
pub const SUPPLEMENT_STEP_DEG: f64 = 2.0;
/// Angular gap that splits a run of visible supplements, degrees.
pub const SEGMENT_GAP_DEG: f64 = 6.0;
/// Hull edges between real points longer than this are openings, metres.
pub const OPENING_EDGE_THRESHOLD: f64 = 1.5;
/// Observer stands this far inside known space from the frontier, metres.
pub const OBSERVER_INSET: f64 = 1.0;
/// Frontier reward per metre of boundary, points.
pub const REWARD_PER_METER: f64 = 10.0;
/// Reward discount reference distance, metres.
pub const DISCOUNT_D0: f64 = 5.0;
/// Reward discount floor.
pub const DISCOUNT_FLOOR: f64 = 0.05;
/// Agent motion between cull rounds, metres.
pub const CULL_MOTION_STEP: f64 = 1.0;

const N_SUPPLEMENTS: usize = (360.0 / SUPPLEMENT_STEP_DEG) as usize;
const SEGMENT_GAP_STEPS: usize = (SEGMENT_GAP_DEG / SUPPLEMENT_STEP_DEG) as usize;

/// Where a hull vertex came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HullSource {
    /// Index into the input point slice.
    Input(usize),
    /// Supplement step index; angle = index × 2°.
    Supplement(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct HullVertex {
    pub point: Point2,
    pub source: HullSource,
}

#[derive(Debug, Clone)]
pub struct HprResult {
    /// Per input point.
    pub visible: Vec<bool>,
    /// Visible points in angular order around the origin, forming a simple
    /// star-shaped polygon that contains the origin.
    pub hull: Vec<HullVertex>,
}

/// Hidden-point-removal visibility. Points closer than 1e-6 to the origin are
/// never visible. With fewer than 3 usable points everything is trivially
/// visible and the hull is whatever those points span.
pub fn hpr_visibility(points: &[Point2], origin: Point2, max_range: f64) -> HprResult {
    let mut work: Vec<(Point2, HullSource)> = Vec::with_capacity(points.len() + N_SUPPLEMENTS);
    for (i, &p) in points.iter().enumerate() {
        if p.dist(origin) >= 1e-6 {
            work.push((p, HullSource::Input(i)));
        }
    }
    if work.len() < 3 {
        let mut visible = vec![false; points.len()];
        let mut hull = Vec::new();
        for &(p, src) in &work {
            if let HullSource::Input(i) = src {
                visible[i] = true;
            }
            hull.push(HullVertex { point: p, source: src });
        }
        return HprResult { visible, hull };
    }
    for k in 0..N_SUPPLEMENTS {
        let a = (k as f64 * SUPPLEMENT_STEP_DEG).to_radians();
        let p = Point2::new(origin.x + max_range * a.cos(), origin.y + max_range * a.sin());
        work.push((p, HullSource::Supplement(k)));
    }

    let flip_radius = 10.0
        * work
            .iter()
            .map(|(p, _)| p.dist(origin))
            .fold(0.0, f64::max);
    let flipped: Vec<Point2> = work
        .iter()
        .map(|(p, _)| {
            let d = p.sub(origin);
            let r = d.norm();
            p.add(d.scale(2.0 * (flip_radius - r) / r))
        })
        .collect();

    let hull_idx = convex_hull_indices(&flipped);
    let mut visible = vec![false; points.len()];
    let mut on_hull: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut hull: Vec<(f64, f64, HullVertex)> = Vec::with_capacity(hull_idx.len());
    for idx in hull_idx {
        let (p, src) = work[idx];
        if let HullSource::Input(i) = src {
            visible[i] = true;
            on_hull.insert((p.x.to_bits(), p.y.to_bits()));
        }
        let d = p.sub(origin);
        hull.push((d.y.atan2(d.x), d.norm(), HullVertex { point: p, source: src }));
    }
    // Visibility is positional: coincident input points share the verdict
    // even though the hull keeps a single representative.
    for (i, p) in points.iter().enumerate() {
        if !visible[i] && on_hull.contains(&(p.x.to_bits(), p.y.to_bits())) {
            visible[i] = true;
        }
    }
    hull.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    HprResult { visible, hull: hull.into_iter().map(|(_, _, v)| v).collect() }
}

/// Strict convex hull via monotone chain; collinear boundary points are not
/// reported. Returns indices into `pts`.
fn convex_hull_indices(pts: &[Point2]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x).then(pts[a].y.total_cmp(&pts[b].y)));
    order.dedup_by(|&mut a, &mut b| pts[a] == pts[b]);
    let n = order.len();
    if n < 3 {
        return order;
    }
    let cross = |o: usize, a: usize, b: usize| pts[a].sub(pts[o]).cross(pts[b].sub(pts[o]));
    let mut hull: Vec<usize> = Vec::with_capacity(2 * n);
    for &i in &order {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in order.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierKind {
    MaxRange,
    Opening,
}

impl FrontierKind {
    pub fn as_u8(self) -> u8 {
        match self {
            FrontierKind::MaxRange => 0,
            FrontierKind::Opening => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FrontierKind::MaxRange),
            1 => Some(FrontierKind::Opening),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierState {
    Active,
    Culled,
}

/// A detected frontier before it is bound to an id, frame and snapped
/// observer. Geometry is in the same coordinates as the detection input.
#[derive(Debug, Clone)]
pub struct RawFrontier {
    pub kind: FrontierKind,
    pub vertices: Vec<Point2>,
    pub centroid: Point2,
    pub size: f64,
    /// Unsnapped observer position, 1 m inside known space.
    pub observer_target: Point2,
}

/// Detects frontiers on one visibility result. `origin` must match the
/// origin passed to [`hpr_visibility`].
pub fn detect_frontiers(hpr: &HprResult, origin: Point2, opening_threshold: f64) -> Vec<RawFrontier> {
    let mut out = Vec::new();

    // Runs of visible supplements, circular in step index.
    let mut sups: Vec<(usize, Point2)> = hpr
        .hull
        .iter()
        .filter_map(|v| match v.source {
            HullSource::Supplement(k) => Some((k, v.point)),
            HullSource::Input(_) => None,
        })
        .collect();
    sups.sort_by_key(|&(k, _)| k);
    if !sups.is_empty() {
        let mut runs: Vec<Vec<Point2>> = vec![vec![sups[0].1]];
        for w in sups.windows(2) {
            if w[1].0 - w[0].0 > SEGMENT_GAP_STEPS {
                runs.push(Vec::new());
            }
            runs.last_mut().unwrap().push(w[1].1);
        }
        // Wrap-around: join the last run to the first when the circular gap
        // is small and they are distinct runs.
        if runs.len() > 1 {
            let first_k = sups.first().unwrap().0;
            let last_k = sups.last().unwrap().0;
            if N_SUPPLEMENTS - last_k + first_k <= SEGMENT_GAP_STEPS {
                let tail = runs.pop().unwrap();
                let head = std::mem::take(&mut runs[0]);
                runs[0] = tail.into_iter().chain(head).collect();
            }
        }
        for run in runs {
            if let Some(f) = polyline_frontier(FrontierKind::MaxRange, run, origin) {
                out.push(f);
            }
        }
    }

    // Long hull edges between real points, wrapping around the polygon.
    let n = hpr.hull.len();
    let edges = if n == 2 { 1 } else { n };
    for i in 0..edges {
        let a = &hpr.hull[i];
        let b = &hpr.hull[(i + 1) % n];
        let (HullSource::Input(_), HullSource::Input(_)) = (a.source, b.source) else {
            continue;
        };
        if a.point.dist(b.point) > opening_threshold {
            if let Some(f) =
                polyline_frontier(FrontierKind::Opening, vec![a.point, b.point], origin)
            {
                out.push(f);
            }
        }
    }
    out
}

fn polyline_frontier(kind: FrontierKind, vertices: Vec<Point2>, origin: Point2) -> Option<RawFrontier> {
    if vertices.len() < 2 {
        return None;
    }
    let size: f64 = vertices.windows(2).map(|w| w[0].dist(w[1])).sum();
    if size <= 0.0 {
        return None;
    }
    let inv = 1.0 / vertices.len() as f64;
    let centroid = vertices.iter().fold(Point2::ZERO, |acc, &p| acc.add(p)).scale(inv);
    let chord = vertices.last().unwrap().sub(vertices[0]);
    let normal = if chord.norm() > 1e-9 {
        let n = Point2::new(-chord.y, chord.x).scale(1.0 / chord.norm());
        if n.dot(origin.sub(centroid)) >= 0.0 {
            n
        } else {
            n.scale(-1.0)
        }
    } else {
        let toward = origin.sub(centroid);
        if toward.norm() > 1e-9 {
            toward.scale(1.0 / toward.norm())
        } else {
            Point2::new(1.0, 0.0)
        }
    };
    let observer_target = centroid.add(normal.scale(OBSERVER_INSET));
    Some(RawFrontier { kind, vertices, centroid, size, observer_target })
}

/// A shared frontier, geometry referenced to `frame_ref`.
#[derive(Debug, Clone)]
pub struct Frontier {
    pub id: FrontierId,
    pub frame_ref: FrameId,
    pub kind: FrontierKind,
    pub state: FrontierState,
    pub vertices: Vec<Point2>,
    pub centroid: Point2,
    pub size: f64,
    /// Observer standpoint plus facing, in frame coordinates.
    pub observer_pose: Pose2,
}

impl Frontier {
    pub fn from_raw(raw: &RawFrontier, id: FrontierId, frame_ref: FrameId, observer: Point2) -> Self {
        let facing = raw.centroid.sub(observer);
        Frontier {
            id,
            frame_ref,
            kind: raw.kind,
            state: FrontierState::Active,
            vertices: raw.vertices.clone(),
            centroid: raw.centroid,
            size: raw.size,
            observer_pose: Pose2::new(observer.x, observer.y, facing.y.atan2(facing.x)),
        }
    }

    pub fn base_reward(&self) -> f64 {
        self.size * REWARD_PER_METER
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(31 + 8 * self.vertices.len());
        w.u16(self.id.agent.0);
        w.u32(self.id.seq);
        w.u16(self.frame_ref.agent.0);
        w.u32(self.frame_ref.seq);
        w.u8(self.kind.as_u8());
        w.u16(self.vertices.len() as u16);
        for v in &self.vertices {
            w.f32(v.x as f32);
            w.f32(v.y as f32);
        }
        w.f32(self.observer_pose.x as f32);
        w.f32(self.observer_pose.y as f32);
        w.f32(self.observer_pose.theta as f32);
        w.f32(self.size as f32);
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Frontier, WireError> {
        let mut r = Reader::new(buf);
        let id = FrontierId { agent: AgentId(r.u16()?), seq: r.u32()? };
        let frame_ref = FrameId::new(AgentId(r.u16()?), r.u32()?);
        let kind = FrontierKind::from_u8(r.u8()?)
            .ok_or(WireError::BadDiscriminant { what: "frontier kind", value: 255 })?;
        let n = r.u16()? as usize;
        let mut vertices = Vec::with_capacity(n);
        for _ in 0..n {
            let x = r.f32()? as f64;
            let y = r.f32()? as f64;
            vertices.push(Point2::new(x, y));
        }
        let observer_pose = Pose2::new(r.f32()? as f64, r.f32()? as f64, r.f32()? as f64);
        let size = r.f32()? as f64;
        r.expect_end()?;
        let centroid = if vertices.is_empty() {
            Point2::ZERO
        } else {
            vertices
                .iter()
                .fold(Point2::ZERO, |acc, &p| acc.add(p))
                .scale(1.0 / vertices.len() as f64)
        };
        Ok(Frontier {
            id,
            frame_ref,
            kind,
            state: FrontierState::Active,
            vertices,
            centroid,
            size,
            observer_pose,
        })
    }
}

/// One observation standpoint with its visibility polygon, kept local to the
/// agent that made it. Geometry is in `frame_ref` coordinates.
#[derive(Debug, Clone)]
pub struct Viewpoint {
    pub frame_ref: FrameId,
    pub origin: Point2,
    pub hull: Vec<Point2>,
    pub created: f64,
}

impl Viewpoint {
    pub fn from_hpr(hpr: &HprResult, frame_ref: FrameId, origin: Point2, created: f64) -> Self {
        Viewpoint {
            frame_ref,
            origin,
            hull: hpr.hull.iter().map(|v| v.point).collect(),
            created,
        }
    }
}

/// Even-odd point-in-polygon with boundary excluded.
pub fn point_strictly_inside(poly: &[Point2], p: Point2) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if dist_point_segment(p, a, b) < 1e-9 {
            return false;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let x = a.x + t * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.norm2();
    if len2 < 1e-18 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// Removes frontier vertices that fall strictly inside any of the given
/// viewpoint hulls, marking emptied frontiers Culled. Geometry on both sides
/// is resolved to a common frame through `resolve`; anything unresolvable is
/// skipped this round. `only` restricts which frontiers are tested. Returns
/// the number of frontiers culled.
pub fn cull_frontiers<F>(
    frontiers: &mut BTreeMap<FrontierId, Frontier>,
    viewpoints: &[Viewpoint],
    only: Option<&BTreeSet<FrontierId>>,
    resolve: F,
) -> usize
where
    F: Fn(FrameId, Point2) -> Option<Point2>,
{
    struct ResolvedHull {
        poly: Vec<Point2>,
        center: Point2,
        radius: f64,
    }
    let hulls: Vec<ResolvedHull> = viewpoints
        .iter()
        .filter_map(|vp| {
            let poly: Option<Vec<Point2>> =
                vp.hull.iter().map(|&p| resolve(vp.frame_ref, p)).collect();
            let poly = poly?;
            if poly.len() < 3 {
                return None;
            }
            let center = poly
                .iter()
                .fold(Point2::ZERO, |acc, &p| acc.add(p))
                .scale(1.0 / poly.len() as f64);
            let radius = poly.iter().map(|p| p.dist(center)).fold(0.0, f64::max);
            Some(ResolvedHull { poly, center, radius })
        })
        .collect();

    let mut culled = 0;
    for frontier in frontiers.values_mut() {
        if frontier.state != FrontierState::Active {
            continue;
        }
        if let Some(ids) = only {
            if !ids.contains(&frontier.id) {
                continue;
            }
        }
        let global: Option<Vec<Point2>> = frontier
            .vertices
            .iter()
            .map(|&v| resolve(frontier.frame_ref, v))
            .collect();
        let Some(global) = global else {
            continue;
        };
        let mut keep = vec![true; global.len()];
        for (i, &g) in global.iter().enumerate() {
            for h in &hulls {
                if g.dist(h.center) > h.radius {
                    continue;
                }
                if point_strictly_inside(&h.poly, g) {
                    keep[i] = false;
                    break;
                }
            }
        }
        if keep.iter().all(|&k| k) {
            continue;
        }
        let mut idx = 0;
        frontier.vertices.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
        if frontier.vertices.is_empty() {
            frontier.state = FrontierState::Culled;
            frontier.size = 0.0;
            culled += 1;
        } else {
            frontier.size = frontier
                .vertices
                .windows(2)
                .map(|w| w[0].dist(w[1]))
                .sum::<f64>()
                .max(0.0);
            frontier.centroid = frontier
                .vertices
                .iter()
                .fold(Point2::ZERO, |acc, &p| acc.add(p))
                .scale(1.0 / frontier.vertices.len() as f64);
            if frontier.size <= 0.0 {
                frontier.state = FrontierState::Culled;
                culled += 1;
            }
        }
    }
    culled
}

/// Reward multiplier for the nearest approach any agent has made to the
/// observer standpoint.
pub fn discount(d_min: f64) -> f64 {
    (d_min / DISCOUNT_D0).clamp(DISCOUNT_FLOOR, 1.0)
}
