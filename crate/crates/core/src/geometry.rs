//! Planar vectors, conformal exterior maps and the three fluid domains.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::gauss_legendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("image point undefined at the origin")]
    ImageOfOrigin,
    #[error("point {0:?} lies outside the fluid domain")]
    OutsideDomain(Vec2),
    #[error("invalid map parameters: {0}")]
    InvalidMap(String),
    #[error("boundary sample needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("the full plane has no boundary")]
    NoBoundary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x1: f64,
    pub x2: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x2: 0.0 };

    #[inline]
    pub const fn new(x1: f64, x2: f64) -> Self {
        Vec2 { x1, x2 }
    }
    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }
    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }
    #[inline]
    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }
    /// Rotation by +90 degrees: (x1, x2) -> (-x2, x1).
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.x2, self.x1)
    }
    #[inline]
    pub fn to_c(self) -> Complex64 {
        Complex64::new(self.x1, self.x2)
    }
    #[inline]
    pub fn from_c(z: Complex64) -> Vec2 {
        Vec2::new(z.re, z.im)
    }
    #[inline]
    pub fn get(self, i: usize) -> f64 {
        if i == 0 {
            self.x1
        } else {
            self.x2
        }
    }
    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
    #[inline]
    pub fn polar(r: f64, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(r * c, r * s)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}
impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}
impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x2)
    }
}
impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 * s, self.x2 * s)
    }
}
impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}
impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 / s, self.x2 / s)
    }
}
impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x1 += o.x1;
        self.x2 += o.x2;
    }
}
impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x1 -= o.x1;
        self.x2 -= o.x2;
    }
}

/// Row-major 2x2 matrix, `m[i][j]`.
pub type Mat2 = [[f64; 2]; 2];
/// `t[i][j][k] = d_j d_k T_i`.
pub type Tensor3 = [[[f64; 2]; 2]; 2];

#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    v.perp()
}

/// Inversion in the unit circle, y* = y/|y|^2.
pub fn image_point(y: Vec2) -> Result<Vec2, GeometryError> {
    let r2 = y.norm_sq();
    if r2 == 0.0 {
        return Err(GeometryError::ImageOfOrigin);
    }
    Ok(y / r2)
}

#[inline]
pub(crate) fn image_unchecked(y: Vec2) -> Vec2 {
    y / y.norm_sq()
}

/// Real 2x2 form of multiplication by the complex number `d`.
#[inline]
pub fn complex_to_mat(d: Complex64) -> Mat2 {
    [[d.re, -d.im], [d.im, d.re]]
}

/// Conformal bijection from the closure of the fluid domain onto the closed
/// exterior of the unit disk, sending infinity to infinity.
pub trait ConformalMap: Send + Sync + fmt::Debug {
    fn map_c(&self, z: Complex64) -> Complex64;
    fn inverse_c(&self, w: Complex64) -> Complex64;
    fn deriv_c(&self, z: Complex64) -> Complex64;
    fn second_deriv_c(&self, z: Complex64) -> Complex64;
    /// Derivative of the inverse map at `w`.
    fn inverse_deriv_c(&self, w: Complex64) -> Complex64 {
        1.0 / self.deriv_c(self.inverse_c(w))
    }
    fn lip_upper(&self) -> f64;
    fn lip_lower(&self) -> f64;
    /// Radius of a centred disk containing the obstacle.
    fn obstacle_radius(&self) -> f64;
    /// Parameter intervals (within `[0, r_max]`) on which `x + r dir` lies in
    /// the obstacle. `dir` is a unit vector.
    fn obstacle_intervals(&self, x: Vec2, dir: Vec2, r_max: f64) -> Vec<(f64, f64)> {
        numeric_obstacle_intervals(self, x, dir, r_max)
    }

    fn forward(&self, x: Vec2) -> Vec2 {
        Vec2::from_c(self.map_c(x.to_c()))
    }
    fn inverse(&self, w: Vec2) -> Vec2 {
        Vec2::from_c(self.inverse_c(w.to_c()))
    }
    fn jacobian(&self, x: Vec2) -> Mat2 {
        complex_to_mat(self.deriv_c(x.to_c()))
    }
    /// `t[i][j][k] = d_j d_k T_i`.
    fn second_derivative(&self, x: Vec2) -> Tensor3 {
        let s = self.second_deriv_c(x.to_c());
        let (p, q) = (s.re, s.im);
        // DT = [[a,-b],[b,a]], with d1 a = p, d1 b = q, d2 a = -q, d2 b = p.
        // T1: d1T1 = a, d2T1 = -b ; T2: d1T2 = b, d2T2 = a.
        [[[p, -q], [-q, -p]], [[q, p], [p, -q]]]
    }
}

fn numeric_obstacle_intervals<M: ConformalMap + ?Sized>(
    m: &M,
    x: Vec2,
    dir: Vec2,
    r_max: f64,
) -> Vec<(f64, f64)> {
    let inside = |r: f64| m.map_c((x + dir * r).to_c()).norm() < 1.0;
    let n = 256;
    let mut out = Vec::new();
    let mut prev = inside(0.0);
    let mut start = if prev { Some(0.0) } else { None };
    let mut r_prev = 0.0;
    for k in 1..=n {
        let r = r_max * k as f64 / n as f64;
        let cur = inside(r);
        if cur != prev {
            let (mut lo, mut hi) = (r_prev, r);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(mid) == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let edge = 0.5 * (lo + hi);
            if cur {
                start = Some(edge);
            } else if let Some(s) = start.take() {
                out.push((s, edge));
            }
        }
        prev = cur;
        r_prev = r;
    }
    if let Some(s) = start {
        out.push((s, r_max));
    }
    out
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMap;

impl ConformalMap for IdentityMap {
    fn map_c(&self, z: Complex64) -> Complex64 {
        z
    }
    fn inverse_c(&self, w: Complex64) -> Complex64 {
        w
    }
    fn deriv_c(&self, _z: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }
    fn second_deriv_c(&self, _z: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn lip_upper(&self) -> f64 {
        1.0
    }
    fn lip_lower(&self) -> f64 {
        1.0
    }
    fn obstacle_radius(&self) -> f64 {
        1.0
    }
    fn obstacle_intervals(&self, x: Vec2, dir: Vec2, r_max: f64) -> Vec<(f64, f64)> {
        circle_intervals(x, dir, 1.0, r_max)
    }
}

/// Intervals of `r in [0, r_max]` with `|x + r dir| < radius`.
pub(crate) fn circle_intervals(x: Vec2, dir: Vec2, radius: f64, r_max: f64) -> Vec<(f64, f64)> {
    let b = x.dot(dir);
    let c = x.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    let (r1, r2) = (-b - s, -b + s);
    let lo = r1.max(0.0);
    let hi = r2.min(r_max);
    if hi > lo {
        vec![(lo, hi)]
    } else {
        Vec::new()
    }
}

/// Exterior of the ellipse with semi-axes `c(1+lambda)`, `c(1-lambda)`;
/// inverse map `z = c (w + lambda / w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoukowskiMap {
    pub c: f64,
    pub lambda: f64,
}

impl JoukowskiMap {
    pub fn new(c: f64, lambda: f64) -> Result<Self, GeometryError> {
        if !(c > 0.0) || !(0.0..1.0).contains(&lambda) {
            return Err(GeometryError::InvalidMap(format!(
                "need c > 0 and 0 <= lambda < 1, got c={c}, lambda={lambda}"
            )));
        }
        Ok(JoukowskiMap { c, lambda })
    }
    pub fn semi_axes(&self) -> (f64, f64) {
        (self.c * (1.0 + self.lambda), self.c * (1.0 - self.lambda))
    }
}

impl ConformalMap for JoukowskiMap {
    fn map_c(&self, z: Complex64) -> Complex64 {
        let q = z / self.c;
        let s = (q * q - 4.0 * self.lambda).sqrt();
        let w1 = 0.5 * (q + s);
        let w2 = 0.5 * (q - s);
        if w1.norm_sqr() >= w2.norm_sqr() {
            w1
        } else {
            w2
        }
    }
    fn inverse_c(&self, w: Complex64) -> Complex64 {
        self.c * (w + self.lambda / w)
    }
    fn deriv_c(&self, z: Complex64) -> Complex64 {
        let w = self.map_c(z);
        1.0 / (self.c * (1.0 - self.lambda / (w * w)))
    }
    fn second_deriv_c(&self, z: Complex64) -> Complex64 {
        let w = self.map_c(z);
        let f = 1.0 - self.lambda / (w * w);
        -2.0 * self.lambda / (self.c * self.c * w * w * w * f * f * f)
    }
    fn inverse_deriv_c(&self, w: Complex64) -> Complex64 {
        self.c * (1.0 - self.lambda / (w * w))
    }
    fn lip_upper(&self) -> f64 {
        0.5 * PI / (self.c * (1.0 - self.lambda))
    }
    fn lip_lower(&self) -> f64 {
        2.0 / (PI * self.c * (1.0 + self.lambda))
    }
    fn obstacle_radius(&self) -> f64 {
        self.c * (1.0 + self.lambda)
    }
    fn obstacle_intervals(&self, x: Vec2, dir: Vec2, r_max: f64) -> Vec<(f64, f64)> {
        let (a, b) = self.semi_axes();
        let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
        let qa = dir.x1 * dir.x1 * ia + dir.x2 * dir.x2 * ib;
        let qb = x.x1 * dir.x1 * ia + x.x2 * dir.x2 * ib;
        let qc = x.x1 * x.x1 * ia + x.x2 * x.x2 * ib - 1.0;
        let disc = qb * qb - qa * qc;
        if disc <= 0.0 {
            return Vec::new();
        }
        let s = disc.sqrt();
        let lo = ((-qb - s) / qa).max(0.0);
        let hi = ((-qb + s) / qa).min(r_max);
        if hi > lo {
            vec![(lo, hi)]
        } else {
            Vec::new()
        }
    }
}

#[derive(Clone, Debug)]
pub enum Domain {
    FullPlane,
    ExteriorUnitDisk,
    ExteriorObstacle(Arc<dyn ConformalMap>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    FullPlane,
    ExteriorUnitDisk,
    ExteriorObstacle,
}

/// Boundary quadrature node: arc-length parameter, point, unit tangent
/// (counterclockwise) and unit normal pointing out of the fluid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub sigma: f64,
    pub y: Vec2,
    pub tau: Vec2,
    pub n: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    pub nodes: Vec<BoundaryNode>,
    pub length: f64,
}

impl BoundarySample {
    /// Equal trapezoid weight of each node.
    pub fn weight(&self) -> f64 {
        self.length / self.nodes.len() as f64
    }
}

impl Domain {
    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::FullPlane => DomainKind::FullPlane,
            Domain::ExteriorUnitDisk => DomainKind::ExteriorUnitDisk,
            Domain::ExteriorObstacle(_) => DomainKind::ExteriorObstacle,
        }
    }

    pub fn has_boundary(&self) -> bool {
        !matches!(self, Domain::FullPlane)
    }

    pub fn map(&self) -> Option<&dyn ConformalMap> {
        match self {
            Domain::FullPlane => None,
            Domain::ExteriorUnitDisk => Some(&IdentityMap),
            Domain::ExteriorObstacle(m) => Some(m.as_ref()),
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        match self {
            Domain::FullPlane => x.is_finite(),
            Domain::ExteriorUnitDisk => x.norm_sq() > 1.0,
            Domain::ExteriorObstacle(m) => m.map_c(x.to_c()).norm_sqr() > 1.0,
        }
    }

    /// Like `contains` but accepts boundary points up to `tol`.
    pub fn contains_closure(&self, x: Vec2, tol: f64) -> bool {
        match self {
            Domain::FullPlane => x.is_finite(),
            Domain::ExteriorUnitDisk => x.norm() >= 1.0 - tol,
            Domain::ExteriorObstacle(m) => m.map_c(x.to_c()).norm() >= 1.0 - tol,
        }
    }

    pub fn obstacle_radius(&self) -> f64 {
        self.map().map_or(0.0, |m| m.obstacle_radius())
    }

    /// Closest-in-chart boundary point: the preimage of `T(x)/|T(x)|`.
    pub fn project_to_boundary(&self, x: Vec2) -> Vec2 {
        match self {
            Domain::FullPlane => x,
            Domain::ExteriorUnitDisk => {
                let r = x.norm();
                if r == 0.0 {
                    Vec2::new(1.0, 0.0)
                } else {
                    x / r
                }
            }
            Domain::ExteriorObstacle(m) => {
                let w = m.map_c(x.to_c());
                let r = w.norm();
                let w1 = if r == 0.0 { Complex64::new(1.0, 0.0) } else { w / r };
                Vec2::from_c(m.inverse_c(w1))
            }
        }
    }

    /// Parameter intervals within `[0, r_max]` on which `x + r dir` is in the
    /// fluid. `dir` must be a unit vector.
    pub fn ray_segments(&self, x: Vec2, dir: Vec2, r_max: f64) -> Vec<(f64, f64)> {
        let holes = match self {
            Domain::FullPlane => return vec![(0.0, r_max)],
            Domain::ExteriorUnitDisk => circle_intervals(x, dir, 1.0, r_max),
            Domain::ExteriorObstacle(m) => {
                let rad = m.obstacle_radius();
                if circle_intervals(x, dir, rad, r_max).is_empty() {
                    Vec::new()
                } else {
                    m.obstacle_intervals(x, dir, r_max)
                }
            }
        };
        let mut out = Vec::with_capacity(holes.len() + 1);
        let mut cur = 0.0;
        for (a, b) in holes {
            if a > cur {
                out.push((cur, a));
            }
            cur = cur.max(b);
        }
        if r_max > cur {
            out.push((cur, r_max));
        }
        out
    }

    /// Angular interval `(lo, hi)`, `hi - lo <= pi`, of ray directions from
    /// `x` that meet the obstacle; `None` on the full plane.
    pub fn hole_cone(&self, x: Vec2) -> Option<(f64, f64)> {
        let c = -x;
        let d = c.norm();
        if d == 0.0 {
            return None;
        }
        let th = c.x2.atan2(c.x1);
        match self {
            Domain::FullPlane => None,
            Domain::ExteriorUnitDisk => {
                let a = (1.0 / d).min(1.0).asin();
                Some((th - a, th + a))
            }
            Domain::ExteriorObstacle(m) => {
                let far = d + 2.0 * m.obstacle_radius();
                let hits = |phi: f64| !m.obstacle_intervals(x, Vec2::polar(1.0, phi), far).is_empty();
                if !hits(th) {
                    return None;
                }
                let edge = |sgn: f64| {
                    let (mut lo, mut hi) = (0.0, 0.5 * PI);
                    if hits(th + sgn * hi) {
                        return hi;
                    }
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if hits(th + sgn * mid) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                };
                Some((th - edge(-1.0), th + edge(1.0)))
            }
        }
    }

    /// Angles at which the circle `|y - x| = radius` crosses the boundary.
    pub fn circle_crossings(&self, x: Vec2, radius: f64) -> Vec<f64> {
        match self {
            Domain::FullPlane => Vec::new(),
            Domain::ExteriorUnitDisk => {
                let d = x.norm();
                if d == 0.0 || d > 1.0 + radius || radius > d + 1.0 || d + radius < 1.0 {
                    return Vec::new();
                }
                // law of cosines: 1 = d^2 + R^2 - 2 d R cos(phi) about the direction to 0
                let c = ((d * d + radius * radius - 1.0) / (2.0 * d * radius)).clamp(-1.0, 1.0);
                let phi = c.acos();
                let th = (-x.x2).atan2(-x.x1);
                vec![th - phi, th + phi]
            }
            Domain::ExteriorObstacle(_) => {
                if self.obstacle_clearance(x) > radius {
                    return Vec::new();
                }
                let n = 720;
                let inside = |a: f64| !self.contains(x + Vec2::polar(radius, a));
                let mut out = Vec::new();
                let step = 2.0 * PI / n as f64;
                let mut prev = inside(0.0);
                for k in 1..=n {
                    let a = k as f64 * step;
                    let cur = inside(a);
                    if cur != prev {
                        let (mut lo, mut hi) = (a - step, a);
                        for _ in 0..50 {
                            let mid = 0.5 * (lo + hi);
                            if inside(mid) == prev {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        out.push(0.5 * (lo + hi));
                    }
                    prev = cur;
                }
                out
            }
        }
    }

    /// Distance lower bound from `x` to the obstacle (infinite for the plane).
    pub fn obstacle_clearance(&self, x: Vec2) -> f64 {
        match self {
            Domain::FullPlane => f64::INFINITY,
            _ => x.norm() - self.obstacle_radius(),
        }
    }

    /// `m` boundary nodes equispaced in arc length.
    pub fn boundary_sample(&self, m: usize) -> Result<BoundarySample, GeometryError> {
        if m < 3 {
            return Err(GeometryError::TooFewNodes(m));
        }
        match self {
            Domain::FullPlane => Err(GeometryError::NoBoundary),
            Domain::ExteriorUnitDisk => {
                let nodes = (0..m)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / m as f64;
                        let y = Vec2::polar(1.0, th);
                        BoundaryNode {
                            sigma: th,
                            y,
                            tau: y.perp(),
                            n: -y,
                        }
                    })
                    .collect();
                Ok(BoundarySample {
                    nodes,
                    length: 2.0 * PI,
                })
            }
            Domain::ExteriorObstacle(map) => Ok(obstacle_boundary(map.as_ref(), m)),
        }
    }
}

fn obstacle_boundary(map: &dyn ConformalMap, m: usize) -> BoundarySample {
    let speed = |th: f64| map.inverse_deriv_c(Complex64::from_polar(1.0, th)).norm();
    let panels = 256usize;
    let (gx, gw) = gauss_legendre(12);
    let dth = 2.0 * PI / panels as f64;
    let panel_len = |a: f64, b: f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        gx.iter()
            .zip(&gw)
            .map(|(&x, &w)| w * speed(mid + half * x))
            .sum::<f64>()
            * half
    };
    let mut cum = vec![0.0; panels + 1];
    for k in 0..panels {
        cum[k + 1] = cum[k] + panel_len(k as f64 * dth, (k + 1) as f64 * dth);
    }
    let length = cum[panels];
    let nodes = (0..m)
        .map(|k| {
            let target = length * k as f64 / m as f64;
            let p = match cum.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
                Ok(i) => i.min(panels - 1),
                Err(i) => i - 1,
            };
            let a = p as f64 * dth;
            let mut th = a + dth * (target - cum[p]) / (cum[p + 1] - cum[p]);
            for _ in 0..30 {
                let f = cum[p] + panel_len(a, th) - target;
                let step = f / speed(th);
                th -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let e = Complex64::from_polar(1.0, th);
            let y = Vec2::from_c(map.inverse_c(e));
            // d/dθ g(e^{iθ}) = g'(e^{iθ}) i e^{iθ}
            let dy = map.inverse_deriv_c(e) * Complex64::i() * e;
            let tau = Vec2::from_c(dy / dy.norm());
            BoundaryNode {
                sigma: target,
                y,
                tau,
                n: tau.perp(),
            }
        })
        .collect();
    BoundarySample { nodes, length }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_point_examples() {
        assert_eq!(image_point(Vec2::new(2.0, 0.0)).unwrap(), Vec2::new(0.5, 0.0));
        assert_eq!(image_point(Vec2::ZERO), Err(GeometryError::ImageOfOrigin));
        let y = Vec2::new(0.3, -1.7);
        let yy = image_point(image_point(y).unwrap()).unwrap();
        assert!((yy - y).norm() < 1e-15);
    }

    #[test]
    fn perp_is_quarter_turn() {
        let v = Vec2::new(1.0, 0.0);
        assert_eq!(v.perp(), Vec2::new(0.0, 1.0));
        assert_eq!(v.perp().perp(), -v);
    }

    #[test]
    fn joukowski_roundtrip_and_boundary() {
        let m = JoukowskiMap::new(1.25, 0.2).unwrap();
        for &(x1, x2) in &[(2.0, 0.3), (-1.7, 1.9), (0.1, 1.5), (5.0, -4.0)] {
            let x = Vec2::new(x1, x2);
            let w = m.forward(x);
            assert!(w.norm() > 1.0);
            assert!((m.inverse(w) - x).norm() < 1e-12);
        }
        let s = Domain::ExteriorObstacle(Arc::new(m)).boundary_sample(64).unwrap();
        for nd in &s.nodes {
            assert!((m.forward(nd.y).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joukowski_jacobian_matches_fd() {
        let m = JoukowskiMap::new(1.25, 0.2).unwrap();
        let x = Vec2::new(1.3, 1.1);
        let h = 1e-6;
        let j = m.jacobian(x);
        for c in 0..2 {
            let e = if c == 0 { Vec2::new(h, 0.0) } else { Vec2::new(0.0, h) };
            let d = (m.forward(x + e) - m.forward(x - e)) / (2.0 * h);
            assert!((d.x1 - j[0][c]).abs() < 1e-8);
            assert!((d.x2 - j[1][c]).abs() < 1e-8);
        }
        let t = m.second_derivative(x);
        for c in 0..2 {
            let e = if c == 0 { Vec2::new(h, 0.0) } else { Vec2::new(0.0, h) };
            let jp = m.jacobian(x + e);
            let jm = m.jacobian(x - e);
            for i in 0..2 {
                for k in 0..2 {
                    let fd = (jp[i][k] - jm[i][k]) / (2.0 * h);
                    assert!((fd - t[i][k][c]).abs() < 1e-7, "{i}{k}{c}");
                }
            }
        }
    }

    #[test]
    fn obstacle_arc_length_equispaced() {
        let m = JoukowskiMap::new(1.25, 0.2).unwrap();
        let s = Domain::ExteriorObstacle(Arc::new(m)).boundary_sample(200).unwrap();
        let h = s.weight();
        for k in 0..200 {
            let a = s.nodes[k].y;
            let b = s.nodes[(k + 1) % 200].y;
            // chord slightly shorter than arc
            let ch = (b - a).norm();
            assert!(ch <= h * (1.0 + 1e-9) && ch > 0.99 * h);
        }
    }

    #[test]
    fn disk_boundary_orientation() {
        let s = Domain::ExteriorUnitDisk.boundary_sample(8).unwrap();
        let nd = s.nodes[0];
        assert_eq!(nd.y, Vec2::new(1.0, 0.0));
        assert_eq!(nd.n, Vec2::new(-1.0, 0.0));
        assert!((nd.tau - Vec2::new(0.0, 1.0)).norm() < 1e-15);
        assert!((nd.tau.perp() - nd.n).norm() < 1e-15);
    }

    #[test]
    fn ray_segments_clip_disk() {
        let d = Domain::ExteriorUnitDisk;
        let segs = d.ray_segments(Vec2::new(2.0, 0.0), Vec2::new(-1.0, 0.0), 10.0);
        assert_eq!(segs.len(), 2);
        assert!((segs[0].1 - 1.0).abs() < 1e-14 && (segs[1].0 - 3.0).abs() < 1e-14);
        let m = JoukowskiMap::new(1.25, 0.2).unwrap();
        let e = Domain::ExteriorObstacle(Arc::new(m));
        let segs = e.ray_segments(Vec2::new(3.0, 0.0), Vec2::new(-1.0, 0.0), 10.0);
        assert!((segs[0].1 - 1.5).abs() < 1e-12 && (segs[1].0 - 4.5).abs() < 1e-12);
        let num = numeric_obstacle_intervals(&m, Vec2::new(3.0, 0.2), Vec2::new(-0.8, 0.6), 10.0);
        let ana = m.obstacle_intervals(Vec2::new(3.0, 0.2), Vec2::new(-0.8, 0.6), 10.0);
        assert_eq!(num.len(), ana.len());
        for (p, q) in num.iter().zip(&ana) {
            assert!((p.0 - q.0).abs() < 1e-10 && (p.1 - q.1).abs() < 1e-10);
        }
    }
}
