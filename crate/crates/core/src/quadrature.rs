//! Gauss rules, clipped polar rules around singular points, truncated plane
//! integrals with tail bounds, boundary trapezoid sums and L^p norms.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundaryNode, BoundarySample, Domain, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("exponent p must satisfy 1 <= p < infinity, got {0}")]
    BadExponent(f64),
    #[error("integrand produced a non-finite value at {0:?}")]
    NonFinite(Vec2),
}

/// Values that can be accumulated by a quadrature rule.
pub trait Accum: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>> Accum for T {}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs n >= 1");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss nodes mapped to [a, b].
pub fn gauss_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(&t, &wt)| (mid + half * t, half * wt)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Gauss nodes in r for cutoff balls (split over two panels).
    pub radial_nodes: usize,
    /// Uniform angular nodes.
    pub angular_nodes: usize,
    /// Outer radius of far-field rules; `None` means 50 epsilon.
    pub truncation_radius: Option<f64>,
    /// Constant `C` of the reported tail bound `C / truncation_radius`.
    pub tail_constant: f64,
    pub target_tol: f64,
    /// Gauss nodes per panel across the cutoff transition annulus.
    pub transition_nodes: usize,
    /// Gauss nodes per geometric far-field panel.
    pub panel_nodes: usize,
    /// Growth ratio of geometric far-field panels.
    pub panel_ratio: f64,
    /// Angular nodes for far-field rules; `None` uses `angular_nodes`.
    pub far_angular_nodes: Option<usize>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial_nodes: 64,
            angular_nodes: 64,
            truncation_radius: None,
            tail_constant: 1.0,
            target_tol: 1e-4,
            transition_nodes: 12,
            panel_nodes: 6,
            panel_ratio: 1.5,
            far_angular_nodes: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.radial_nodes < 2 || self.angular_nodes < 4 {
            return Err(QuadratureError::InvalidSpec(
                "need radial_nodes >= 2 and angular_nodes >= 4".into(),
            ));
        }
        if self.transition_nodes < 1 || self.panel_nodes < 1 || !(self.panel_ratio > 1.0) {
            return Err(QuadratureError::InvalidSpec(
                "need transition_nodes, panel_nodes >= 1 and panel_ratio > 1".into(),
            ));
        }
        if let Some(r) = self.truncation_radius {
            if !(r > 0.0) {
                return Err(QuadratureError::InvalidSpec("truncation_radius must be > 0".into()));
            }
        }
        if !(self.tail_constant >= 0.0) || !(self.target_tol > 0.0) {
            return Err(QuadratureError::InvalidSpec(
                "tail_constant >= 0 and target_tol > 0 required".into(),
            ));
        }
        Ok(())
    }

    pub fn truncation_for(&self, eps: f64) -> f64 {
        self.truncation_radius.unwrap_or(50.0 * eps)
    }

    pub fn far_angles(&self) -> usize {
        self.far_angular_nodes.unwrap_or(self.angular_nodes)
    }

    /// Reported truncation tail bound.
    pub fn tail_bound(&self, truncation_radius: f64) -> f64 {
        self.tail_constant / truncation_radius
    }
}

/// Radial interval with its own Gauss count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialPanel {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

/// Panels `[r0, r0*q], [r0*q, r0*q^2], ...` up to `r1`.
pub fn geometric_panels(r0: f64, r1: f64, ratio: f64, n: usize) -> Vec<RadialPanel> {
    let mut out = Vec::new();
    let mut a = r0;
    while a < r1 * (1.0 - 1e-12) {
        let mut b = a * ratio;
        if b > r1 || (r1 - b) < 0.25 * (b - a) {
            b = r1;
        }
        out.push(RadialPanel { a, b, n });
        a = b;
    }
    out
}

/// Polar rule around `center` over the given radial panels, clipped to the
/// fluid by exact ray/boundary intersection. Returns `(y, weight)` pairs;
/// the weight includes the polar Jacobian `r`.
pub fn polar_nodes(
    domain: &Domain,
    center: Vec2,
    panels: &[RadialPanel],
    n_theta: usize,
) -> Vec<(Vec2, f64)> {
    let rmax = panels.iter().fold(0.0f64, |m, p| m.max(p.b));
    let rules: Vec<(RadialPanel, Vec<(f64, f64)>)> = panels
        .iter()
        .map(|p| (*p, gauss_legendre_pair(p.n)))
        .collect();
    let no_clip = domain.obstacle_clearance(center) > rmax;
    let angles = if no_clip {
        uniform_angles(n_theta)
    } else {
        let mut brk: Vec<f64> = domain.circle_crossings(center, rmax);
        if let Some((lo, hi)) = domain.hole_cone(center) {
            brk.push(lo);
            brk.push(hi);
        }
        if brk.is_empty() {
            uniform_angles(n_theta)
        } else {
            broken_angles(&brk, n_theta)
        }
    };
    let mut out = Vec::with_capacity(n_theta * panels.iter().map(|p| p.n).sum::<usize>());
    for (th, dth) in angles {
        let dir = Vec2::polar(1.0, th);
        let segs = if no_clip {
            vec![(0.0, rmax)]
        } else {
            domain.ray_segments(center, dir, rmax)
        };
        for (p, rule) in &rules {
            for &(s0, s1) in &segs {
                let a = p.a.max(s0);
                let b = p.b.min(s1);
                // slivers along tangent rays of a boundary centre carry no mass
                if b - a <= 1e-12 * rmax {
                    continue;
                }
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for &(t, w) in rule {
                    let r = mid + half * t;
                    out.push((center + dir * r, w * half * r * dth));
                }
            }
        }
    }
    out
}

fn uniform_angles(n: usize) -> Vec<(f64, f64)> {
    let dth = 2.0 * PI / n as f64;
    (0..n).map(|k| ((k as f64 + 0.5) * dth, dth)).collect()
}

/// Gauss rules between angular breakpoints (tangent rays, boundary
/// crossings of the outer circle), with cosine endpoint clustering so that
/// square-root and kink behaviour at the breakpoints is smoothed.
fn broken_angles(brk: &[f64], n: usize) -> Vec<(f64, f64)> {
    let mut b: Vec<f64> = brk.iter().map(|a| a.rem_euclid(2.0 * PI)).collect();
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
    let m = b.len();
    let mut out = Vec::with_capacity(n + 4 * m);
    for i in 0..m {
        let a = b[i];
        let c = if i + 1 < m { b[i + 1] } else { b[0] + 2.0 * PI };
        let len = c - a;
        if len <= 1e-14 {
            continue;
        }
        let k = ((n as f64 * len / (2.0 * PI)).round() as usize).max(4);
        for (s, w) in gauss_on(0.0, 1.0, k) {
            let u = 0.5 * (1.0 - (PI * s).cos());
            let du = 0.5 * PI * (PI * s).sin();
            out.push((a + len * u, w * du * len));
        }
    }
    out
}

fn gauss_legendre_pair(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.into_iter().zip(w).collect()
}

/// Integral over the ball `B_radius(center)` clipped to the domain, in polar
/// coordinates centred at `center` (cancels a `1/|x - y|` singularity).
pub fn singular_polar_integral<T: Accum>(
    domain: &Domain,
    center: Vec2,
    radius: f64,
    spec: &QuadratureSpec,
    integrand: impl Fn(Vec2) -> T,
) -> Result<T, QuadratureError> {
    spec.validate()?;
    if !(radius > 0.0) {
        return Err(QuadratureError::InvalidSpec("radius must be > 0".into()));
    }
    let n1 = spec.radial_nodes / 2;
    let panels = [
        RadialPanel { a: 0.0, b: 0.5 * radius, n: n1.max(1) },
        RadialPanel { a: 0.5 * radius, b: radius, n: (spec.radial_nodes - n1).max(1) },
    ];
    let mut acc = T::default();
    for (y, w) in polar_nodes(domain, center, &panels, spec.angular_nodes) {
        acc = acc + integrand(y) * w;
    }
    Ok(acc)
}

/// Integral over `{inner <= |y - x| <= R}` in the domain, `R` the spec's
/// truncation radius for scale `eps`. The first panel pair resolves
/// `[inner, 2 inner]`; beyond it panels grow geometrically. Returns the
/// value and the reported tail bound.
pub fn truncated_plane_integral<T: Accum>(
    domain: &Domain,
    x: Vec2,
    inner: f64,
    eps: f64,
    spec: &QuadratureSpec,
    integrand: impl Fn(Vec2) -> T,
) -> Result<(T, f64), QuadratureError> {
    spec.validate()?;
    let rt = spec.truncation_for(eps);
    if !(inner > 0.0) || rt <= 2.0 * inner {
        return Err(QuadratureError::InvalidSpec(format!(
            "need 0 < 2*inner < truncation radius, got inner={inner}, R={rt}"
        )));
    }
    let panels = far_panels(inner, 2.0 * inner, rt, spec);
    let mut acc = T::default();
    for (y, w) in polar_nodes(domain, x, &panels, spec.far_angles()) {
        acc = acc + integrand(y) * w;
    }
    Ok((acc, spec.tail_bound(rt)))
}

/// Two transition panels on `[inner, outer]`, then geometric panels to `rt`.
pub fn far_panels(inner: f64, outer: f64, rt: f64, spec: &QuadratureSpec) -> Vec<RadialPanel> {
    let mid = 0.5 * (inner + outer);
    let mut p = vec![
        RadialPanel { a: inner, b: mid, n: spec.transition_nodes },
        RadialPanel { a: mid, b: outer.min(rt), n: spec.transition_nodes },
    ];
    if rt > outer {
        p.extend(geometric_panels(outer, rt, spec.panel_ratio, spec.panel_nodes));
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryIntegral<T> {
    pub value: T,
    /// Set when fewer than 16 nodes resolve the integrand's support.
    pub underresolved: bool,
}

/// Periodic trapezoid sum over an arc-length sample; spectrally accurate for
/// smooth periodic integrands.
pub fn boundary_line_integral<T: Accum>(
    sample: &BoundarySample,
    integrand: impl Fn(&BoundaryNode) -> T,
) -> BoundaryIntegral<T> {
    let w = sample.weight();
    let mut acc = T::default();
    let mut touched = 0usize;
    for nd in &sample.nodes {
        let v = integrand(nd);
        acc = acc + v * w;
        touched += 1;
    }
    BoundaryIntegral {
        value: acc,
        underresolved: touched < 16,
    }
}

/// Region of integration for `lp_norm`.
#[derive(Clone, Debug)]
pub enum Region {
    /// Ball centred at a (possible) `1/r`-type singularity of the integrand.
    Ball { center: Vec2, radius: f64 },
    /// Polar box `r0 < |y - center| < r1`.
    Annulus { center: Vec2, r0: f64, r1: f64 },
}

/// `(\int_U |f|^p)^{1/p}` for a scalar magnitude `f`. Ball rules use the
/// graded radius `r = R s^q`, `q = 1/(2-p)` (p < 2) which makes
/// `r^{1-p} dr` polynomial in `s`.
pub fn lp_norm(
    domain: &Domain,
    region: &Region,
    p: f64,
    spec: &QuadratureSpec,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64, QuadratureError> {
    match *region {
        Region::Ball { center, radius } => lp_norm_ball(domain, center, radius, p, spec, |o| f(center + o)),
        Region::Annulus { center, r0, r1 } => {
            check_lp(p, spec)?;
            let mut acc = 0.0;
            let panels = [RadialPanel { a: r0, b: r1, n: spec.radial_nodes }];
            for (y, w) in polar_nodes(domain, center, &panels, spec.angular_nodes) {
                let v = f(y).abs();
                if !v.is_finite() {
                    return Err(QuadratureError::NonFinite(y));
                }
                acc += v.powf(p) * w;
            }
            Ok(acc.powf(1.0 / p))
        }
    }
}

fn check_lp(p: f64, spec: &QuadratureSpec) -> Result<(), QuadratureError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(QuadratureError::BadExponent(p));
    }
    spec.validate()
}

/// Ball version of [`lp_norm`] with `f` taking the offset `y - center`, so
/// integrands singular at the centre can be evaluated below the rounding
/// floor of `center`. For `p` near 2 the mass spreads over all scales down to 0.
pub fn lp_norm_ball(
    domain: &Domain,
    center: Vec2,
    radius: f64,
    p: f64,
    spec: &QuadratureSpec,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64, QuadratureError> {
    check_lp(p, spec)?;
    let q = if p < 2.0 { 1.0 / (2.0 - p) } else { 1.0 };
    let q = q.min(100.0);
    let rule = gauss_on(0.0, 1.0, spec.radial_nodes);
    let dth = 2.0 * PI / spec.angular_nodes as f64;
    let mut acc = 0.0;
    for k in 0..spec.angular_nodes {
        let th = (k as f64 + 0.5) * dth;
        let dir = Vec2::polar(1.0, th);
        for (s0, s1) in domain.ray_segments(center, dir, radius) {
            // graded map on [s0, s1] measured from the centre
            let (u0, u1) = ((s0 / radius).powf(1.0 / q), (s1 / radius).powf(1.0 / q));
            for &(s, w) in &rule {
                let u = u0 + (u1 - u0) * s;
                let r = radius * u.powf(q);
                let dr = radius * q * u.powf(q - 1.0) * (u1 - u0);
                if !(r > 0.0) {
                    continue;
                }
                let o = dir * r;
                let v = f(o).abs();
                if !v.is_finite() {
                    return Err(QuadratureError::NonFinite(center + o));
                }
                if v > 0.0 {
                    // log form: |f|^p and the weights over/underflow near the centre as p -> 2
                    acc += (p * v.ln() + w.ln() + dr.ln() + r.ln() + dth.ln()).exp();
                }
            }
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// Adaptive tensor-Gauss cubature on a rectangle, refining by quadrisection
/// until the local child/parent discrepancy is below `tol * area_fraction`.
pub fn adaptive_cubature(
    lo: (f64, f64),
    hi: (f64, f64),
    tol: f64,
    max_depth: usize,
    f: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    let (gx, gw) = gauss_legendre(5);
    let rule = |a: (f64, f64), b: (f64, f64)| -> f64 {
        let (m1, h1) = (0.5 * (a.0 + b.0), 0.5 * (b.0 - a.0));
        let (m2, h2) = (0.5 * (a.1 + b.1), 0.5 * (b.1 - a.1));
        let mut s = 0.0;
        for i in 0..gx.len() {
            for j in 0..gx.len() {
                s += gw[i] * gw[j] * f(m1 + h1 * gx[i], m2 + h2 * gx[j]);
            }
        }
        s * h1 * h2
    };
    let total_area = (hi.0 - lo.0) * (hi.1 - lo.1);
    let mut stack = vec![(lo, hi, rule(lo, hi), 0usize)];
    let mut acc = 0.0;
    while let Some((a, b, coarse, depth)) = stack.pop() {
        let m = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
        let kids = [
            (a, m),
            ((m.0, a.1), (b.0, m.1)),
            ((a.0, m.1), (m.0, b.1)),
            (m, b),
        ];
        let vals: Vec<f64> = kids.iter().map(|&(p, q)| rule(p, q)).collect();
        let fine: f64 = vals.iter().sum();
        let frac = (b.0 - a.0) * (b.1 - a.1) / total_area;
        if (fine - coarse).abs() <= tol * frac.max(1e-6) || depth >= max_depth {
            acc += fine;
        } else {
            for (k, &(p, q)) in kids.iter().enumerate() {
                stack.push((p, q, vals[k], depth + 1));
            }
        }
    }
    acc
}
