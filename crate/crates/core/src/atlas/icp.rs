//! Point-to-point scan alignment between two feature sets.
//!
//! Iterative closest point in 2D with a closed-form rigid fit per iteration.
//! Correspondences use a hashed grid so each query touches at most nine
//! buckets. The caller supplies an initial relative pose; alignment refines
//! it or reports that the overlap is unusable.

use crate::geom::{wrap_angle, Point2, Pose2};
use std::collections::BTreeMap;

/// Maximum correspondence distance in metres.
pub const MATCH_RADIUS: f64 = 1.0;
/// Iteration cap.
pub const MAX_ITERS: usize = 30;
/// Parameter-change convergence threshold (metres and radians combined).
pub const CONVERGENCE_EPS: f64 = 1e-4;
/// Minimum matched pairs for a usable alignment.
pub const MIN_INLIERS: usize = 30;
/// Minimum fraction of source points that must find a correspondence. Guards
/// against wall-sliding fits where unique features simply drop out of range.
pub const MIN_INLIER_FRACTION: f64 = 0.5;
/// Maximum RMS residual in metres for a usable alignment.
pub const MAX_RMS: f64 = 0.3;
/// Smallest scatter eigenvalue below which geometry is treated as collinear.
pub const DEGENERACY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum MatchResult {
    /// Refined pose of the source frame expressed in the target frame, with
    /// fit statistics.
    Converged { rel: Pose2, rms: f64, inliers: usize },
    /// Too few overlapping points or residuals too large.
    NoMatch,
    /// Matched geometry is collinear; the fit is unconstrained along a line.
    Degenerate,
}

struct GridIndex<'a> {
    cell: f64,
    buckets: BTreeMap<(i32, i32), Vec<usize>>,
    pts: &'a [Point2],
}

impl<'a> GridIndex<'a> {
    fn build(pts: &'a [Point2], cell: f64) -> Self {
        let mut buckets: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
        for (i, p) in pts.iter().enumerate() {
            let key = ((p.x / cell).floor() as i32, (p.y / cell).floor() as i32);
            buckets.entry(key).or_default().push(i);
        }
        GridIndex { cell, buckets, pts }
    }

    fn nearest_within(&self, q: Point2, radius: f64) -> Option<usize> {
        let kx = (q.x / self.cell).floor() as i32;
        let ky = (q.y / self.cell).floor() as i32;
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &i in ids {
                        let d2 = self.pts[i].sub(q).norm2();
                        if d2 <= radius * radius && best.map_or(true, |(bd, _)| d2 < bd) {
                            best = Some((d2, i));
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Aligns `source` points to `target` points. `init` maps source coordinates
/// into the target frame and must be within roughly the match radius of the
/// true offset for the iteration to capture.
pub fn align(target: &[Point2], source: &[Point2], init: Pose2) -> MatchResult {
    if target.is_empty() || source.is_empty() {
        return MatchResult::NoMatch;
    }
    let index = GridIndex::build(target, MATCH_RADIUS);
    let mut rel = init;
    let mut pairs: Vec<(Point2, Point2)> = Vec::new();
    for _ in 0..MAX_ITERS {
        pairs.clear();
        for &s in source {
            let moved = rel.transform(s);
            if let Some(t) = index.nearest_within(moved, MATCH_RADIUS) {
                pairs.push((s, target[t]));
            }
        }
        if pairs.len() < 3 {
            return MatchResult::NoMatch;
        }
        let step = match rigid_fit(&pairs) {
            Some(p) => p,
            None => return MatchResult::Degenerate,
        };
        let delta = rel.between(step);
        rel = step;
        if delta.translation().norm() + delta.theta.abs() < CONVERGENCE_EPS {
            break;
        }
    }
    // Final correspondence pass at the converged pose.
    pairs.clear();
    let mut sq_sum = 0.0;
    for &s in source {
        let moved = rel.transform(s);
        if let Some(t) = index.nearest_within(moved, MATCH_RADIUS) {
            sq_sum += target[t].sub(moved).norm2();
            pairs.push((s, target[t]));
        }
    }
    let inliers = pairs.len();
    if inliers < MIN_INLIERS || (inliers as f64) < MIN_INLIER_FRACTION * source.len() as f64 {
        return MatchResult::NoMatch;
    }
    if scatter_min_eigenvalue(&pairs) < DEGENERACY_EPS {
        return MatchResult::Degenerate;
    }
    let rms = (sq_sum / inliers as f64).sqrt();
    if rms > MAX_RMS {
        return MatchResult::NoMatch;
    }
    MatchResult::Converged { rel, rms, inliers }
}

/// Closed-form least-squares rigid transform carrying the source side of
/// `pairs` onto the target side. `None` when every pair is coincident and the
/// rotation is unconstrained.
fn rigid_fit(pairs: &[(Point2, Point2)]) -> Option<Pose2> {
    let n = pairs.len() as f64;
    let mut sc = Point2::ZERO;
    let mut tc = Point2::ZERO;
    for &(s, t) in pairs {
        sc = sc.add(s);
        tc = tc.add(t);
    }
    sc = sc.scale(1.0 / n);
    tc = tc.scale(1.0 / n);
    let mut dot = 0.0;
    let mut cross = 0.0;
    for &(s, t) in pairs {
        let a = s.sub(sc);
        let b = t.sub(tc);
        dot += a.dot(b);
        cross += a.cross(b);
    }
    if dot == 0.0 && cross == 0.0 {
        return None;
    }
    let theta = wrap_angle(cross.atan2(dot));
    let (sin, cos) = theta.sin_cos();
    let tx = tc.x - (cos * sc.x - sin * sc.y);
    let ty = tc.y - (sin * sc.x + cos * sc.y);
    Some(Pose2::new(tx, ty, theta))
}

/// Smallest eigenvalue of the target-side scatter covariance. Near zero means
/// the matched points lie on a line.
fn scatter_min_eigenvalue(pairs: &[(Point2, Point2)]) -> f64 {
    let n = pairs.len() as f64;
    let mut c = Point2::ZERO;
    for &(_, t) in pairs {
        c = c.add(t);
    }
    c = c.scale(1.0 / n);
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for &(_, t) in pairs {
        let d = t.sub(c);
        xx += d.x * d.x;
        xy += d.x * d.y;
        yy += d.y * d.y;
    }
    xx /= n;
    xy /= n;
    yy /= n;
    let tr = xx + yy;
    let det = xx * yy - xy * xy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 - disc
}
