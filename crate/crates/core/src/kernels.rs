//! Biot-Savart kernels (free, domain, hydrodynamic, background, image
//! remainder), their derivatives in the source point, the radial cutoff and
//! the far-field weight tensor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{image_unchecked, Domain, Mat2, Tensor3, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel singular: target and source coincide at {0:?}")]
    Singular(Vec2),
    #[error("point {0:?} is outside the fluid domain")]
    OutsideDomain(Vec2),
    #[error("kernel {0} is only defined for the exterior of the unit disk")]
    WrongDomain(&'static str),
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    FreeSpace,
    Domain,
    Hydrodynamic,
    Background,
    ImageRemainder,
}

/// Which kernel the reconstruction uses in the cutoff integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// The domain kernel `K_Omega`.
    Domain,
    /// `J = K_Omega + Kbar`, decaying like `1/|y|` in the source.
    Hydrodynamic,
}

#[inline]
pub(crate) fn k_raw(z: Vec2) -> Vec2 {
    z.perp() / (2.0 * PI * z.norm_sq())
}

/// `K(x) = x^perp / (2 pi |x|^2)`.
pub fn k_free(x: Vec2) -> Result<Vec2, KernelError> {
    if x.norm_sq() == 0.0 {
        return Err(KernelError::Singular(x));
    }
    Ok(k_raw(x))
}

/// `g[j][p] = d_p N^j(z)`, `N(z) = z / (2 pi |z|^2)`.
#[inline]
pub fn grad_n(z: Vec2) -> Mat2 {
    let r2 = z.norm_sq();
    let a = 1.0 / (2.0 * PI * r2);
    let b = 1.0 / (PI * r2 * r2);
    let zz = [z.x1, z.x2];
    let mut g = [[0.0; 2]; 2];
    for j in 0..2 {
        for p in 0..2 {
            g[j][p] = if j == p { a } else { 0.0 } - zz[j] * zz[p] * b;
        }
    }
    g
}

/// `h[j][m][p] = d_m d_p N^j(z)`.
#[inline]
pub fn hess_n(z: Vec2) -> Tensor3 {
    let r2 = z.norm_sq();
    let c1 = 1.0 / (PI * r2 * r2);
    let c2 = 4.0 / (PI * r2 * r2 * r2);
    let zz = [z.x1, z.x2];
    let d = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
    let mut h = [[[0.0; 2]; 2]; 2];
    for j in 0..2 {
        for m in 0..2 {
            for p in 0..2 {
                h[j][m][p] = -(zz[m] * d(j, p) + zz[p] * d(j, m) + zz[j] * d(m, p)) * c1
                    + zz[j] * zz[m] * zz[p] * c2;
            }
        }
    }
    h
}

/// Value, source gradient `grad[j][p] = d_{y_p} G^j` and source Hessian
/// `hess[j][m][p] = d_{y_m} d_{y_p} G^j` of a vector kernel `G(x, y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelJet {
    pub val: [f64; 2],
    pub grad: Mat2,
    pub hess: Tensor3,
}

impl KernelJet {
    fn add_scaled(&mut self, o: &KernelJet, s: f64) {
        for j in 0..2 {
            self.val[j] += s * o.val[j];
            for p in 0..2 {
                self.grad[j][p] += s * o.grad[j][p];
                for m in 0..2 {
                    self.hess[j][m][p] += s * o.hess[j][m][p];
                }
            }
        }
    }
}

/// Derivatives of `K(z)` in `z`: value, `dk[j][p]`, `hk[j][m][p]`.
#[inline]
fn k_derivs(z: Vec2) -> ([f64; 2], Mat2, Tensor3) {
    let gn = grad_n(z);
    let hn = hess_n(z);
    let k = k_raw(z);
    // K^1 = -N^2, K^2 = N^1
    let dk = [[-gn[1][0], -gn[1][1]], [gn[0][0], gn[0][1]]];
    let mut hk = [[[0.0; 2]; 2]; 2];
    for m in 0..2 {
        for p in 0..2 {
            hk[0][m][p] = -hn[1][m][p];
            hk[1][m][p] = hn[0][m][p];
        }
    }
    ([k.x1, k.x2], dk, hk)
}

/// Jet of `K(x - y)` in `y`.
pub fn free_jet(x: Vec2, y: Vec2) -> KernelJet {
    let (v, dk, hk) = k_derivs(x - y);
    let mut jet = KernelJet { val: v, hess: hk, ..Default::default() };
    for j in 0..2 {
        for p in 0..2 {
            jet.grad[j][p] = -dk[j][p];
        }
    }
    jet
}

/// Jet of `K(x - y*)` in `y`.
pub fn image_jet(x: Vec2, y: Vec2) -> KernelJet {
    let ys = image_unchecked(y);
    let (v, dk, hk) = k_derivs(x - ys);
    let r2 = y.norm_sq();
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let yy = [y.x1, y.x2];
    let d = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
    // dys[j][k] = d_j y*_k
    let mut dys = [[0.0; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            dys[j][k] = d(j, k) / r2 - 2.0 * yy[j] * yy[k] / r4;
        }
    }
    let ddys = |n: usize, j: usize, k: usize| -> f64 {
        8.0 * yy[j] * yy[k] * yy[n] / r6
            - 2.0 * (d(j, n) * yy[k] + d(n, k) * yy[j] + d(j, k) * yy[n]) / r4
    };
    let mut jet = KernelJet { val: v, ..Default::default() };
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..2 {
                s -= dk[i][k] * dys[j][k];
            }
            jet.grad[i][j] = s;
        }
        for n in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s -= dk[i][k] * ddys(n, j, k);
                    for m in 0..2 {
                        s += hk[i][m][k] * dys[n][m] * dys[j][k];
                    }
                }
                jet.hess[i][n][j] = s;
            }
        }
    }
    jet
}

/// Jet in `y` of the unit-disk kernel `K(x-y) - K(x-y*) [+ K(x)]`.
pub fn disk_jet(x: Vec2, y: Vec2, choice: KernelChoice) -> KernelJet {
    let mut jet = free_jet(x, y);
    jet.add_scaled(&image_jet(x, y), -1.0);
    if choice == KernelChoice::Hydrodynamic {
        let kb = k_raw(x);
        jet.val[0] += kb.x1;
        jet.val[1] += kb.x2;
    }
    jet
}

/// Jet in `y` of the chosen kernel on any domain (unchecked arguments).
pub fn domain_jet(domain: &Domain, x: Vec2, y: Vec2, choice: KernelChoice) -> KernelJet {
    match domain {
        Domain::FullPlane => free_jet(x, y),
        Domain::ExteriorUnitDisk => disk_jet(x, y, choice),
        Domain::ExteriorObstacle(map) => {
            let tx = map.forward(x);
            let ty = map.forward(y);
            let dtx = map.jacobian(x);
            let dty = map.jacobian(y);
            let ddty = map.second_derivative(y);
            let b = disk_jet(tx, ty, choice);
            // chain rule in y for each disk component k
            let mut c = KernelJet::default();
            for k in 0..2 {
                c.val[k] = b.val[k];
                for m in 0..2 {
                    c.grad[k][m] = (0..2).map(|q| b.grad[k][q] * dty[q][m]).sum();
                    for n in 0..2 {
                        let mut s = 0.0;
                        for q in 0..2 {
                            s += b.grad[k][q] * ddty[q][m][n];
                            for r in 0..2 {
                                s += b.hess[k][q][r] * dty[q][m] * dty[r][n];
                            }
                        }
                        c.hess[k][m][n] = s;
                    }
                }
            }
            // row vector times DT(x)
            let mut out = KernelJet::default();
            for i in 0..2 {
                for k in 0..2 {
                    let t = dtx[k][i];
                    out.val[i] += c.val[k] * t;
                    for m in 0..2 {
                        out.grad[i][m] += c.grad[k][m] * t;
                        for n in 0..2 {
                            out.hess[i][m][n] += c.hess[k][m][n] * t;
                        }
                    }
                }
            }
            out
        }
    }
}

/// Value of the chosen kernel (unchecked arguments).
#[inline]
pub fn kernel_value(domain: &Domain, x: Vec2, y: Vec2, choice: KernelChoice) -> Vec2 {
    match domain {
        Domain::FullPlane => k_raw(x - y),
        Domain::ExteriorUnitDisk => {
            let mut v = k_raw(x - y) - k_raw(x - image_unchecked(y));
            if choice == KernelChoice::Hydrodynamic {
                v += k_raw(x);
            }
            v
        }
        Domain::ExteriorObstacle(map) => {
            let tx = map.forward(x);
            let ty = map.forward(y);
            let b = kernel_value(&Domain::ExteriorUnitDisk, tx, ty, choice);
            row_times(b, map.jacobian(x))
        }
    }
}

/// [`kernel_value`] at `y = x + o`, with the singular part evaluated from
/// the exact offset `o` rather than from the rounded difference `x - y`.
pub fn kernel_value_offset(domain: &Domain, x: Vec2, o: Vec2, choice: KernelChoice) -> Vec2 {
    let sing = |z: Vec2| {
        let r = z.norm();
        z.perp() / (2.0 * PI * r) / r
    };
    let y = x + o;
    match domain {
        Domain::FullPlane => sing(-o),
        Domain::ExteriorUnitDisk => {
            let mut v = sing(-o) - k_raw(x - image_unchecked(y));
            if choice == KernelChoice::Hydrodynamic {
                v += k_raw(x);
            }
            v
        }
        Domain::ExteriorObstacle(map) => {
            let tx = map.forward(x);
            let ty = map.forward(y);
            let dz = if o.norm() < 1e-8 * (1.0 + x.norm()) {
                -Vec2::from_c(map.deriv_c(x.to_c()) * o.to_c())
            } else {
                tx - ty
            };
            let mut b = sing(dz) - k_raw(tx - image_unchecked(ty));
            if choice == KernelChoice::Hydrodynamic {
                b += k_raw(tx);
            }
            row_times(b, map.jacobian(x))
        }
    }
}

#[inline]
fn row_times(v: Vec2, m: Mat2) -> Vec2 {
    Vec2::new(v.x1 * m[0][0] + v.x2 * m[1][0], v.x1 * m[0][1] + v.x2 * m[1][1])
}

fn check_pair(domain: &Domain, x: Vec2, y: Vec2) -> Result<(), KernelError> {
    if !domain.contains_closure(x, 1e-12) {
        return Err(KernelError::OutsideDomain(x));
    }
    if !domain.contains_closure(y, 1e-12) {
        return Err(KernelError::OutsideDomain(y));
    }
    if (x - y).norm_sq() == 0.0 {
        return Err(KernelError::Singular(x));
    }
    Ok(())
}

/// Domain Biot-Savart kernel `K_Omega(x, y)`.
pub fn k_domain(domain: &Domain, x: Vec2, y: Vec2) -> Result<Vec2, KernelError> {
    check_pair(domain, x, y)?;
    Ok(kernel_value(domain, x, y, KernelChoice::Domain))
}

/// Background field `Kbar(x) = K(T(x)) DT(x)` (zero on the full plane).
pub fn kbar(domain: &Domain, x: Vec2) -> Result<Vec2, KernelError> {
    if !domain.contains_closure(x, 1e-12) {
        return Err(KernelError::OutsideDomain(x));
    }
    Ok(kbar_raw(domain, x))
}

#[inline]
pub(crate) fn kbar_raw(domain: &Domain, x: Vec2) -> Vec2 {
    match domain {
        Domain::FullPlane => Vec2::ZERO,
        Domain::ExteriorUnitDisk => k_raw(x),
        Domain::ExteriorObstacle(map) => row_times(k_raw(map.forward(x)), map.jacobian(x)),
    }
}

/// Hydrodynamic kernel `J = K_Omega + Kbar`.
pub fn j_kernel(domain: &Domain, x: Vec2, y: Vec2) -> Result<Vec2, KernelError> {
    check_pair(domain, x, y)?;
    Ok(kernel_value(domain, x, y, KernelChoice::Hydrodynamic))
}

/// Image remainder `L(x, y) = K(x - y*) - K(x)` on the exterior of the disk.
pub fn l_kernel(domain: &Domain, x: Vec2, y: Vec2) -> Result<Vec2, KernelError> {
    if !matches!(domain, Domain::ExteriorUnitDisk) {
        return Err(KernelError::WrongDomain("L"));
    }
    check_pair(domain, x, y)?;
    Ok(k_raw(x - image_unchecked(y)) - k_raw(x))
}

/// Radial cutoff profile: 1 on `[0, c_inner]`, 0 on `[c_outer, inf)`, joined
/// by the C-infinity step `E(1-s) / (E(1-s) + E(s))`, `E(t) = exp(-1/t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub c_inner: f64,
    pub c_outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { c_inner: 0.5, c_outer: 1.0 }
    }
}

#[inline]
fn e_fun(t: f64) -> (f64, f64, f64) {
    if t < 2e-3 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / t).exp();
    let t2 = t * t;
    (e, e / t2, e * (1.0 - 2.0 * t) / (t2 * t2))
}

impl Cutoff {
    pub fn new(c_inner: f64, c_outer: f64) -> Result<Self, KernelError> {
        if !(c_inner > 0.0 && c_outer > c_inner) {
            return Err(KernelError::InvalidCutoff(format!(
                "need 0 < c_inner < c_outer, got {c_inner}, {c_outer}"
            )));
        }
        Ok(Cutoff { c_inner, c_outer })
    }

    /// Profile and its first two derivatives at radius `r`.
    pub fn profile_jet(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.c_inner {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.c_outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.c_outer - self.c_inner;
        let s = (r - self.c_inner) / w;
        let (p, pd, pdd) = e_fun(1.0 - s);
        let (q, qd, qdd) = e_fun(s);
        // derivatives in s: p' = -E'(1-s), p'' = E''(1-s)
        let (p1, p2) = (-pd, pdd);
        let (q1, q2) = (qd, qdd);
        let d = p + q;
        let d1 = p1 + q1;
        let a = p / d;
        let num1 = p1 * q - p * q1;
        let a1 = num1 / (d * d);
        let a2 = ((p2 * q - p * q2) * d - 2.0 * num1 * d1) / (d * d * d);
        (a, a1 / w, a2 / (w * w))
    }

    pub fn profile(&self, r: f64) -> f64 {
        self.profile_jet(r).0
    }
    pub fn d1(&self, r: f64) -> f64 {
        self.profile_jet(r).1
    }
    pub fn d2(&self, r: f64) -> f64 {
        self.profile_jet(r).2
    }

    /// `a_eps(v) = a(|v| / eps)`.
    pub fn a_eps(&self, v: Vec2, eps: f64) -> f64 {
        self.profile(v.norm() / eps)
    }

    /// Value, gradient and Hessian of `a_eps` at `v`.
    pub fn a_eps_jet(&self, v: Vec2, eps: f64) -> (f64, Vec2, Mat2) {
        let r = v.norm();
        let (a, a1, a2) = self.profile_jet(r / eps);
        if a1 == 0.0 && a2 == 0.0 {
            return (a, Vec2::ZERO, [[0.0; 2]; 2]);
        }
        let u = v / r;
        let g1 = a1 / eps;
        let g2 = a2 / (eps * eps);
        let uu = [u.x1, u.x2];
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                let id = if i == k { 1.0 } else { 0.0 };
                h[i][k] = g2 * uu[i] * uu[k] + g1 / r * (id - uu[i] * uu[k]);
            }
        }
        (a, u * g1, h)
    }
}

/// Far-field weight tensors `W^j[m][p] = d_{y_m} (grad_y^perp F^j)_p`,
/// `F^j = (1 - a_eps(x - y)) G^j(x, y)`, for both components `j`.
pub fn farfield_weights(
    domain: &Domain,
    cutoff: &Cutoff,
    eps: f64,
    x: Vec2,
    y: Vec2,
    choice: KernelChoice,
) -> [Mat2; 2] {
    let g = domain_jet(domain, x, y, choice);
    weights_from_jet(&g, cutoff, eps, x - y)
}

#[inline]
pub(crate) fn weights_from_jet(g: &KernelJet, cutoff: &Cutoff, eps: f64, xy: Vec2) -> [Mat2; 2] {
    let (a, ga, ha) = cutoff.a_eps_jet(xy, eps);
    // as functions of y: grad A = -ga, hess A = ha
    let gav = [-ga.x1, -ga.x2];
    let mut out = [[[0.0; 2]; 2]; 2];
    for j in 0..2 {
        let mut hf = [[0.0; 2]; 2];
        for m in 0..2 {
            for p in 0..2 {
                hf[m][p] = (1.0 - a) * g.hess[j][m][p]
                    - gav[m] * g.grad[j][p]
                    - g.grad[j][m] * gav[p]
                    - g.val[j] * ha[m][p];
            }
        }
        for m in 0..2 {
            out[j][m][0] = -hf[m][1];
            out[j][m][1] = hf[m][0];
        }
    }
    out
}

/// Single-component far-field weight `W^j(x, y)`.
pub fn farfield_weight(
    domain: &Domain,
    cutoff: &Cutoff,
    eps: f64,
    x: Vec2,
    y: Vec2,
    j: usize,
    choice: KernelChoice,
) -> Result<Mat2, KernelError> {
    check_pair(domain, x, y)?;
    Ok(farfield_weights(domain, cutoff, eps, x, y, choice)[j.min(1)])
}

/// Hessian of `(1 - a_eps(x - y)) G^j(x, y)` in `y` for both `j`.
pub fn far_hessians(
    domain: &Domain,
    cutoff: &Cutoff,
    eps: f64,
    x: Vec2,
    y: Vec2,
    choice: KernelChoice,
) -> [Mat2; 2] {
    let w = farfield_weights(domain, cutoff, eps, x, y, choice);
    // invert w[m][0] = -H[m][1], w[m][1] = H[m][0]
    let mut h = [[[0.0; 2]; 2]; 2];
    for j in 0..2 {
        for m in 0..2 {
            h[j][m][0] = w[j][m][1];
            h[j][m][1] = -w[j][m][0];
        }
    }
    h
}
