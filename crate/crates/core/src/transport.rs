//! Back-to-label maps, forward Lagrangian markers and flow-map diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::{ll_norm, Grid, VelocityField};
use crate::geometry::{Domain, Vec2};

/// Counts of points pushed back onto the boundary during one advance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportStats {
    pub foot_projections: usize,
    pub label_projections: usize,
    pub traced: usize,
}

/// Velocity linear in time between two samples on `[t_n, t_n + dt]`.
pub struct TimeSlab<'a> {
    pub left: &'a VelocityField,
    pub right: &'a VelocityField,
}

impl TimeSlab<'_> {
    /// Velocity at fraction `s in [0, 1]` of the slab.
    #[inline]
    pub fn at(&self, s: f64, x: Vec2) -> Vec2 {
        if s == 0.0 {
            self.left.at(x)
        } else if s == 1.0 {
            self.right.at(x)
        } else {
            self.left.at(x) * (1.0 - s) + self.right.at(x) * s
        }
    }
}

/// Foot of the characteristic through `x` at the slab end, traced back one
/// slab with classical RK4.
#[inline]
pub fn backtrace(slab: &TimeSlab<'_>, x: Vec2, dt: f64) -> Vec2 {
    let k1 = slab.at(1.0, x);
    let k2 = slab.at(0.5, x - k1 * (0.5 * dt));
    let k3 = slab.at(0.5, x - k2 * (0.5 * dt));
    let k4 = slab.at(0.0, x - k3 * dt);
    x - (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// New label field `L_{n+1}(x) = L_n(foot(x))`; feet outside the window
/// reuse the label displacement at the nearest window point. Feet and labels of active
/// nodes that land in the obstacle are projected to the boundary and counted.
pub fn advance_labels(
    grid: &Grid,
    labels: &[Vec2],
    active: &[bool],
    domain: &Domain,
    slab: &TimeSlab<'_>,
    dt: f64,
) -> (Vec<Vec2>, TransportStats) {
    let res: Vec<(Vec2, bool, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.node_at(k);
            let mut foot = backtrace(slab, x, dt);
            let mut fp = false;
            let mut lp = false;
            if active[k] && domain.has_boundary() && !domain.contains(foot) {
                foot = domain.project_to_boundary(foot);
                fp = true;
            }
            let mut l = match grid.interp(labels, foot) {
                _ if foot == x => labels[k],
                Some(l) => l,
                None => {
                    // carry the displacement of the nearest window point
                    let lo = grid.origin;
                    let hi = grid.upper();
                    let p = Vec2::new(foot.x1.clamp(lo.x1, hi.x1), foot.x2.clamp(lo.x2, hi.x2));
                    foot + (grid.interp(labels, p).unwrap_or(p) - p)
                }
            };
            if active[k] && domain.has_boundary() && !domain.contains_closure(l, 0.0) {
                l = domain.project_to_boundary(l);
                lp = true;
            }
            (l, fp, lp)
        })
        .collect();
    let mut stats = TransportStats { traced: grid.len(), ..Default::default() };
    let out = res
        .into_iter()
        .map(|(l, fp, lp)| {
            stats.foot_projections += fp as usize;
            stats.label_projections += lp as usize;
            l
        })
        .collect();
    (out, stats)
}

/// Implicit-trapezoid marker step `X' = X + dt/2 (u_n(X) + u_{n+1}(X'))`,
/// solved by fixed-point iteration. Returns new positions and the velocity
/// `u_{n+1}(X')` at them.
pub fn advance_markers(
    positions: &[Vec2],
    velocities: &[Vec2],
    slab: &TimeSlab<'_>,
    dt: f64,
) -> (Vec<Vec2>, Vec<Vec2>) {
    let res: Vec<(Vec2, Vec2)> = positions
        .par_iter()
        .zip(velocities.par_iter())
        .map(|(&x, &u)| {
            let mut y = x + u * dt;
            let mut v = slab.right.at(y);
            for _ in 0..50 {
                let yn = x + (u + v) * (0.5 * dt);
                let diff = (yn - y).norm();
                y = yn;
                v = slab.right.at(y);
                if diff < 1e-15 * (1.0 + y.norm()) {
                    break;
                }
            }
            (y, v)
        })
        .collect();
    res.into_iter().unzip()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    /// Sampled log-Lipschitz norm of the velocity.
    pub ll_norm: f64,
    /// `max |det DL - 1|` over nodes with a full active stencil.
    pub area_distortion: f64,
    /// Hölder exponent `exp(-alpha t)` guaranteed for the flow map.
    pub holder_beta: f64,
    /// `max |L(x) - L(y)| / |x - y|^beta` over neighbouring nodes.
    pub holder_quotient: f64,
}

pub fn flow_diagnostics(
    grid: &Grid,
    labels: &[Vec2],
    velocity: &[Vec2],
    active: &[bool],
    alpha: f64,
    t: f64,
) -> FlowDiagnostics {
    let beta = (-alpha * t).exp();
    let mut dist = 0.0f64;
    let mut quot = 0.0f64;
    let h = grid.h;
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let k = grid.index(i, j);
            let (e, w, n, s) = (k + 1, k - 1, k + grid.nx, k - grid.nx);
            if !(active[k] && active[e] && active[w] && active[n] && active[s]) {
                continue;
            }
            let dx = (labels[e] - labels[w]) / (2.0 * h);
            let dy = (labels[n] - labels[s]) / (2.0 * h);
            let det = dx.x1 * dy.x2 - dx.x2 * dy.x1;
            dist = dist.max((det - 1.0).abs());
            let hb = h.powf(beta);
            quot = quot.max((labels[e] - labels[k]).norm() / hb).max((labels[n] - labels[k]).norm() / hb);
        }
    }
    let samples: Vec<(Vec2, Vec2)> = (0..grid.len())
        .filter(|&k| active[k])
        .map(|k| (grid.node_at(k), velocity[k]))
        .collect();
    let ll = if samples.len() >= 2 { ll_norm(&samples, 200_000) } else { 0.0 };
    FlowDiagnostics { ll_norm: ll, area_distortion: dist, holder_beta: beta, holder_quotient: quot }
}
