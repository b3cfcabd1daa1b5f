//! Nonlinear least squares over SE(2) relative-pose constraints.
//!
//! Gauss-Newton with iteratively reweighted Cauchy robust costs, a damped
//! retry when a step fails to reduce the cost, and a fixed-anchor gauge. The
//! normal equations are solved with the sparse LDL factorization in [`ldl`].

use super::ldl::{self, SymMatrix};
use crate::geom::{wrap_angle, Pose2};

/// Robust kernel reference scale for translation residuals, metres.
pub const ROBUST_SCALE_XY: f64 = 0.5;
/// Robust kernel reference scale for heading residuals, radians.
pub const ROBUST_SCALE_THETA: f64 = 5.0 * std::f64::consts::PI / 180.0;
/// Iteration cap per optimize call.
pub const MAX_ITERATIONS: usize = 50;
/// Relative cost improvement below which iteration stops.
pub const REL_COST_EPS: f64 = 1e-6;
/// Cost floor treated as fully converged.
pub const ABS_COST_EPS: f64 = 1e-18;
const LAMBDA_INIT: f64 = 1e-6;
const LAMBDA_MAX: f64 = 1e2;
const LAMBDA_FACTOR: f64 = 10.0;

/// One variable of the graph. Fixed nodes are excluded from the state vector
/// and pin the gauge.
#[derive(Debug, Clone, Copy)]
pub struct OptNode {
    pub pose: Pose2,
    pub fixed: bool,
}

/// A relative-pose measurement from node `a` to node `b`.
#[derive(Debug, Clone, Copy)]
pub struct OptEdge {
    pub a: usize,
    pub b: usize,
    pub rel: Pose2,
    pub sigma_xy: f64,
    pub sigma_theta: f64,
    /// Robustified edges get Cauchy downweighting; odometry stays quadratic.
    pub robust: bool,
}

#[derive(Debug, Clone)]
pub struct OptReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    /// Cost after each accepted step.
    pub cost_trace: Vec<f64>,
}

/// Residual of one edge and its Jacobians with respect to (x, y, theta) of
/// both endpoints. Unwhitened.
///
/// r_t = Rrel^T (Ra^T (p_b - p_a) - t_rel), r_theta = wrap(th_b - th_a - th_rel).
pub fn edge_residual(xa: Pose2, xb: Pose2, rel: Pose2) -> ([f64; 3], [[f64; 3]; 3], [[f64; 3]; 3]) {
    let dx = xb.x - xa.x;
    let dy = xb.y - xa.y;
    let (sa, ca) = xa.theta.sin_cos();
    // q = Ra^T d
    let qx = ca * dx + sa * dy;
    let qy = -sa * dx + ca * dy;
    let (sr, cr) = rel.theta.sin_cos();
    let ex = cr * (qx - rel.x) + sr * (qy - rel.y);
    let ey = -sr * (qx - rel.x) + cr * (qy - rel.y);
    let eth = wrap_angle(xb.theta - xa.theta - rel.theta);

    // A = Rrel^T Ra^T
    let a00 = cr * ca + sr * -sa;
    let a01 = cr * sa + sr * ca;
    let a10 = -sr * ca + cr * -sa;
    let a11 = -sr * sa + cr * ca;
    // d(Ra^T)/dtheta applied to d, then rotated by Rrel^T: -A S d with
    // S = [[0,-1],[1,0]], so S d = (-dy, dx).
    let sdx = -dy;
    let sdy = dx;
    let dth_x = -(a00 * sdx + a01 * sdy);
    let dth_y = -(a10 * sdx + a11 * sdy);

    let ja = [
        [-a00, -a01, dth_x],
        [-a10, -a11, dth_y],
        [0.0, 0.0, -1.0],
    ];
    let jb = [
        [a00, a01, 0.0],
        [a10, a11, 0.0],
        [0.0, 0.0, 1.0],
    ];
    ([ex, ey, eth], ja, jb)
}

fn edge_cost_terms(nodes: &[OptNode], e: &OptEdge) -> (f64, f64) {
    let (r, _, _) = edge_residual(nodes[e.a].pose, nodes[e.b].pose, e.rel);
    let wx = 1.0 / e.sigma_xy;
    let wt = 1.0 / e.sigma_theta;
    let s = (r[0] * wx).powi(2) + (r[1] * wx).powi(2) + (r[2] * wt).powi(2);
    (s, robust_delta2(e))
}

/// Squared Cauchy transition point in whitened units, averaged over the three
/// residual components so the kernel has a single scalar scale per edge.
fn robust_delta2(e: &OptEdge) -> f64 {
    let dx = ROBUST_SCALE_XY / e.sigma_xy;
    let dt = ROBUST_SCALE_THETA / e.sigma_theta;
    (2.0 * dx * dx + dt * dt) / 3.0
}

fn total_cost(nodes: &[OptNode], edges: &[OptEdge]) -> f64 {
    let mut c = 0.0;
    for e in edges {
        let (s, d2) = edge_cost_terms(nodes, e);
        c += if e.robust { d2 * (1.0 + s / d2).ln() } else { s };
    }
    0.5 * c
}

/// Runs the optimization in place. At least one node must be fixed; edges must
/// reference valid nodes. Nodes unreachable from a fixed node leave the normal
/// equations singular, which the damped retry tolerates but does not resolve,
/// so callers only pass anchored components.
pub fn optimize(nodes: &mut Vec<OptNode>, edges: &[OptEdge]) -> OptReport {
    assert!(nodes.iter().any(|n| n.fixed), "gauge requires a fixed node");
    let mut slot = vec![usize::MAX; nodes.len()];
    let mut n_free = 0;
    for (i, n) in nodes.iter().enumerate() {
        if !n.fixed {
            slot[i] = n_free;
            n_free += 1;
        }
    }
    let initial_cost = total_cost(nodes, edges);
    let mut cost = initial_cost;
    let mut trace = Vec::new();
    let mut iterations = 0;
    if n_free == 0 {
        return OptReport { initial_cost, final_cost: cost, iterations, cost_trace: trace };
    }

    'outer: for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let dim = 3 * n_free;
        let mut h = SymMatrix::new(dim);
        let mut g = vec![0.0f64; dim];
        for e in edges {
            let (r, ja, jb) = edge_residual(nodes[e.a].pose, nodes[e.b].pose, e.rel);
            let wx = 1.0 / e.sigma_xy;
            let wt = 1.0 / e.sigma_theta;
            let wrow = [wx, wx, wt];
            let s: f64 = (0..3).map(|i| (r[i] * wrow[i]).powi(2)).sum();
            let w = if e.robust { 1.0 / (1.0 + s / robust_delta2(e)) } else { 1.0 };
            let blocks = [(e.a, &ja), (e.b, &jb)];
            for (ni, jac) in blocks {
                if slot[ni] == usize::MAX {
                    continue;
                }
                let base = 3 * slot[ni];
                for row in 0..3 {
                    let s2 = wrow[row] * wrow[row] * w;
                    for col in 0..3 {
                        g[base + col] += s2 * jac[row][col] * r[row];
                    }
                }
            }
            for (ni, jaci) in blocks {
                if slot[ni] == usize::MAX {
                    continue;
                }
                let bi = 3 * slot[ni];
                for (nj, jacj) in blocks {
                    if slot[nj] == usize::MAX || slot[nj] < slot[ni] {
                        continue;
                    }
                    let bj = 3 * slot[nj];
                    for row in 0..3 {
                        let s2 = wrow[row] * wrow[row] * w;
                        for ci in 0..3 {
                            let start = if bi == bj && ni == nj { ci } else { 0 };
                            for cj in start..3 {
                                let (ri, rj) = (bi + ci, bj + cj);
                                if ri <= rj {
                                    h.add(ri, rj, s2 * jaci[row][ci] * jacj[row][cj]);
                                }
                            }
                        }
                    }
                }
            }
        }

        let mut lambda = 0.0;
        loop {
            let mut hd = h.clone();
            if lambda > 0.0 {
                hd.damp(lambda);
            }
            let step = ldl::factor(&hd).map(|f| {
                let mut x: Vec<f64> = g.iter().map(|v| -v).collect();
                f.solve(&mut x);
                x
            });
            if let Some(dx) = step {
                let mut candidate = nodes.clone();
                for (i, n) in candidate.iter_mut().enumerate() {
                    if slot[i] != usize::MAX {
                        let b = 3 * slot[i];
                        n.pose.x += dx[b];
                        n.pose.y += dx[b + 1];
                        n.pose.theta = wrap_angle(n.pose.theta + dx[b + 2]);
                    }
                }
                let new_cost = total_cost(&candidate, edges);
                if new_cost <= cost {
                    *nodes = candidate;
                    let rel_drop = (cost - new_cost) / cost.max(ABS_COST_EPS);
                    cost = new_cost;
                    trace.push(cost);
                    if rel_drop < REL_COST_EPS || cost < ABS_COST_EPS {
                        break 'outer;
                    }
                    break;
                }
            }
            lambda = if lambda == 0.0 { LAMBDA_INIT } else { lambda * LAMBDA_FACTOR };
            if lambda > LAMBDA_MAX {
                break 'outer;
            }
        }
    }
    OptReport { initial_cost, final_cost: cost, iterations, cost_trace: trace }
}
