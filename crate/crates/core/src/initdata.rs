//! Smooth compactly supported approximations of bounded initial velocities:
//! the stream function along conformal rays, boundary-respecting
//! mollification, and the cut-off sequence `u_n = grad^perp (phi_n psi_n)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{serfati_norm, FieldError, Grid, ScalarFn, VectorFn};
use crate::geometry::{Domain, Vec2};
use crate::kernels::Cutoff;
use crate::quadrature::gauss_on;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitDataError {
    #[error("mollification index n = {0} must be at least 4")]
    Index(usize),
    #[error("chart width {width} too small for mollifier radius {eps}")]
    Chart { width: f64, eps: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Gauss panels along the stream-function path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRule {
    pub panels: usize,
    pub nodes: usize,
}

impl Default for PathRule {
    fn default() -> Self {
        PathRule { panels: 4, nodes: 8 }
    }
}

/// `psi(x) = -int_gamma u^perp . ds` with `gamma` the preimage of the ray
/// from `T(x)/|T(x)|` to `T(x)` (from the origin on the full plane), so
/// that `u = grad^perp psi` and `psi = 0` on the boundary.
pub fn stream_function(domain: &Domain, u: &dyn Fn(Vec2) -> Vec2, x: Vec2, rule: PathRule) -> f64 {
    let seg = |s0: f64, s1: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let h = (s1 - s0) / rule.panels as f64;
        (0..rule.panels)
            .map(|k| {
                gauss_on(s0 + k as f64 * h, s0 + (k + 1) as f64 * h, rule.nodes)
                    .into_iter()
                    .map(|(s, w)| w * f(s))
                    .sum::<f64>()
            })
            .sum()
    };
    match domain {
        Domain::FullPlane => -seg(0.0, 1.0, &|s| u(x * s).perp().dot(x)),
        Domain::ExteriorUnitDisk => {
            let r = x.norm();
            if r <= 1.0 {
                return 0.0;
            }
            let e = x / r;
            -seg(1.0, r, &|s| u(e * s).perp().dot(e))
        }
        Domain::ExteriorObstacle(map) => {
            let w = map.forward(x);
            let r = w.norm();
            if r <= 1.0 {
                return 0.0;
            }
            let e = w / r;
            -seg(1.0, r, &|s| {
                let ws = e * s;
                let dz = Vec2::from_c(map.inverse_deriv_c(ws.to_c()) * e.to_c());
                u(map.inverse(ws)).perp().dot(dz)
            })
        }
    }
}

/// Scalar stream function with finite-difference velocity.
#[derive(Clone)]
pub struct StreamFunction {
    pub psi: ScalarFn,
    /// Centred-difference step for `grad^perp psi`.
    pub fd_step: f64,
}

impl StreamFunction {
    pub fn new(psi: ScalarFn) -> Self {
        StreamFunction { psi, fd_step: 1e-4 }
    }

    /// Exact stream function of `u` by path integration.
    pub fn of_velocity(domain: &Domain, u: VectorFn, rule: PathRule) -> Self {
        let d = domain.clone();
        StreamFunction::new(Arc::new(move |x| stream_function(&d, &*u, x, rule)))
    }

    #[inline]
    pub fn value(&self, x: Vec2) -> f64 {
        (self.psi)(x)
    }

    /// `grad^perp psi = (-d2 psi, d1 psi)`.
    pub fn velocity(&self, x: Vec2) -> Vec2 {
        let h = self.fd_step;
        let p = &self.psi;
        let d1 = (p(x + Vec2::new(h, 0.0)) - p(x - Vec2::new(h, 0.0))) / (2.0 * h);
        let d2 = (p(x + Vec2::new(0.0, h)) - p(x - Vec2::new(0.0, h))) / (2.0 * h);
        Vec2::new(-d2, d1)
    }

    /// Discrete divergence of [`Self::velocity`] with the same stencil.
    pub fn divergence(&self, x: Vec2) -> f64 {
        let h = self.fd_step;
        let e1 = Vec2::new(h, 0.0);
        let e2 = Vec2::new(0.0, h);
        let a = (self.velocity(x + e1).x1 - self.velocity(x - e1).x1) / (2.0 * h);
        let b = (self.velocity(x + e2).x2 - self.velocity(x - e2).x2) / (2.0 * h);
        a + b
    }
}

/// Normalized even bump `exp(-1/(1-|y|^2))` on the unit disk, as a discrete
/// polar rule symmetric under `y2 -> -y2`.
pub fn mollifier_rule(radial: usize, angular: usize) -> Vec<(Vec2, f64)> {
    let eta = |r: f64| if r < 1.0 { (-1.0 / (1.0 - r * r)).exp() } else { 0.0 };
    let mut out = Vec::with_capacity(radial * angular);
    let dth = 2.0 * PI / angular as f64;
    for (r, w) in gauss_on(0.0, 1.0, radial) {
        for k in 0..angular {
            let th = (k as f64 + 0.5) * dth;
            out.push((Vec2::polar(r, th), w * r * dth * eta(r)));
        }
    }
    let total: f64 = out.iter().map(|p| p.1).sum();
    for p in &mut out {
        p.1 /= total;
    }
    out
}

/// Boundary-flattening chart `x -> (theta, rho)` with `rho = |T x| - 1`.
fn chart(domain: &Domain, x: Vec2) -> (f64, f64) {
    let w = match domain {
        Domain::ExteriorObstacle(m) => m.forward(x),
        _ => x,
    };
    (w.x2.atan2(w.x1), w.norm() - 1.0)
}

fn chart_inv(domain: &Domain, th: f64, rho: f64) -> Vec2 {
    let w = Vec2::polar(1.0 + rho, th);
    match domain {
        Domain::ExteriorObstacle(m) => m.inverse(w),
        _ => w,
    }
}

/// Width of the boundary collar (in `rho`) handled by the chart.
pub const COLLAR: f64 = 0.5;

/// `psi_n`: the odd extension across `rho = 0` mollified in the chart near
/// the boundary, blended by a partition of unity with plain mollification
/// in the interior; `eps = 1/n`.
pub fn mollified_stream(domain: &Domain, psi: &StreamFunction, n: usize) -> Result<StreamFunction, InitDataError> {
    if n < 4 {
        return Err(InitDataError::Index(n));
    }
    let eps = 1.0 / n as f64;
    // interior part must stay in the fluid: collar inner edge beyond eps
    let lip = match domain {
        Domain::ExteriorObstacle(m) => m.lip_upper(),
        _ => 1.0,
    };
    if domain.has_boundary() && 0.5 * COLLAR < eps * lip {
        return Err(InitDataError::Chart { width: 0.5 * COLLAR, eps: eps * lip });
    }
    let rule = Arc::new(mollifier_rule(8, 16));
    let p = psi.psi.clone();
    let d = domain.clone();
    let interior = {
        let rule = rule.clone();
        let p = p.clone();
        move |x: Vec2| rule.iter().map(|(y, w)| w * p(x + *y * eps)).sum::<f64>()
    };
    if !domain.has_boundary() {
        return Ok(StreamFunction::new(Arc::new(interior)));
    }
    let blend = Cutoff { c_inner: 0.5 * COLLAR, c_outer: COLLAR };
    let f = move |x: Vec2| {
        let (th, rho) = chart(&d, x);
        let b = blend.profile(rho.max(0.0));
        let near = if b > 0.0 {
            let odd = |th: f64, r: f64| {
                if r >= 0.0 {
                    p(chart_inv(&d, th, r))
                } else {
                    -p(chart_inv(&d, th, -r))
                }
            };
            rule.iter().map(|(y, w)| w * odd(th + eps * y.x1, rho + eps * y.x2)).sum::<f64>()
        } else {
            0.0
        };
        let far = if b < 1.0 { interior(x) } else { 0.0 };
        b * near + (1.0 - b) * far
    };
    Ok(StreamFunction::new(Arc::new(f)))
}

/// Cut-off `phi_n(x) = h(|x| / n)` with `h = 1` on `[0, 1]`, `0` beyond 2.
pub fn cutoff_n(x: Vec2, n: usize) -> f64 {
    Cutoff { c_inner: 1.0, c_outer: 2.0 }.profile(x.norm() / n as f64)
}

/// `u_n = grad^perp (phi_n psi_n)`, compactly supported in `B_{2n}`.
pub fn approx_velocity(domain: &Domain, psi: &StreamFunction, n: usize) -> Result<StreamFunction, InitDataError> {
    let psi_n = mollified_stream(domain, psi, n)?;
    let p = psi_n.psi.clone();
    Ok(StreamFunction::new(Arc::new(move |x| cutoff_n(x, n) * p(x))))
}

/// Measured properties of one member of the approximating sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxCheck {
    pub n: usize,
    /// `sup |u_n - u|` over the fluid nodes of the check grid.
    pub sup_diff: f64,
    /// `||u_n||_S` on the check grid.
    pub s_norm: f64,
    /// `max |psi_n|` over boundary samples.
    pub boundary_psi: f64,
    /// `max |u_n . normal|` over boundary samples.
    pub tangency: f64,
    /// `max |div u_n|` over the check grid.
    pub divergence: f64,
}

/// Sweep of [`approx_velocity`] over `ns`, evaluated on `grid` (fluid
/// nodes only) and on `boundary_samples` points of the boundary.
pub fn check_sequence(
    domain: &Domain,
    u: VectorFn,
    ns: &[usize],
    grid: &Grid,
    boundary_samples: usize,
) -> Result<Vec<ApproxCheck>, InitDataError> {
    use rayon::prelude::*;
    let psi = StreamFunction::of_velocity(domain, u.clone(), PathRule::default());
    let active: Vec<bool> = grid.nodes().iter().map(|x| domain.contains(*x)).collect();
    let bnd = if domain.has_boundary() {
        domain.boundary_sample(boundary_samples).map(|b| b.nodes).unwrap_or_default()
    } else {
        Vec::new()
    };
    ns.iter()
        .map(|&n| {
            let un = approx_velocity(domain, &psi, n)?;
            let samples: Vec<Vec2> = grid
                .nodes()
                .par_iter()
                .zip(&active)
                .map(|(x, a)| if *a { un.velocity(*x) } else { Vec2::ZERO })
                .collect();
            let sup_diff = grid
                .nodes()
                .iter()
                .zip(&samples)
                .zip(&active)
                .filter(|(_, a)| **a)
                .map(|((x, v), _)| (*v - u(*x)).norm())
                .fold(0.0, f64::max);
            let s = serfati_norm(grid, &samples, Some(&active))?;
            let divergence = grid
                .nodes()
                .par_iter()
                .zip(&active)
                .filter(|(_, a)| **a)
                .map(|(x, _)| un.divergence(*x).abs())
                .reduce(|| 0.0, f64::max);
            let (boundary_psi, tangency) = bnd
                .par_iter()
                .map(|b| (un.value(b.y).abs(), un.velocity(b.y).dot(b.n).abs()))
                .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
            Ok(ApproxCheck { n, sup_diff, s_norm: s.total(), boundary_psi, tangency, divergence })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_is_normalized_and_even() {
        let r = mollifier_rule(8, 16);
        let s: f64 = r.iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-14);
        let m: f64 = r.iter().map(|p| p.1 * p.0.x2).sum();
        assert!(m.abs() < 1e-15);
    }

    #[test]
    fn cutoff_support() {
        assert_eq!(cutoff_n(Vec2::new(3.9, 0.0), 4), 1.0);
        assert_eq!(cutoff_n(Vec2::new(8.0, 0.1), 4), 0.0);
    }

    #[test]
    fn small_index_rejected() {
        let s = StreamFunction::new(Arc::new(|_| 0.0));
        assert!(matches!(mollified_stream(&Domain::FullPlane, &s, 3), Err(InitDataError::Index(3))));
    }
}
