//! Grid-sampled velocity and vorticity fields, bicubic interpolation, the
//! Serfati and log-Lipschitz norms, and direct/renormalized Biot-Savart sums.

use std::f64::consts::PI;
use std::ops::{Add, Mul};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, Vec2};
use crate::kernels::{kernel_value, Cutoff, KernelChoice};
use crate::quadrature::{gauss_on, QuadratureSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid needs at least 3 nodes per direction, got {0}x{1}")]
    GridTooSmall(usize, usize),
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("sample count {got} does not match grid size {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("vorticity support radius is required for the direct sum")]
    MissingSupport,
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
    #[error("window too small for a {0}x{0} unit-area block")]
    WindowTooSmall(usize),
}

pub type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

/// Uniform node grid `origin + (i h, j h)`, row-major index `j * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(origin: Vec2, h: f64, nx: usize, ny: usize) -> Result<Self, FieldError> {
        if nx < 3 || ny < 3 {
            return Err(FieldError::GridTooSmall(nx, ny));
        }
        if !(h > 0.0) {
            return Err(FieldError::BadSpacing(h));
        }
        Ok(Grid { origin, h, nx, ny })
    }

    /// Square grid of `n x n` nodes on `[-half, half]^2` around `center`.
    pub fn square(center: Vec2, half: f64, n: usize) -> Result<Self, FieldError> {
        if n < 3 {
            return Err(FieldError::GridTooSmall(n, n));
        }
        let h = 2.0 * half / (n - 1) as f64;
        Grid::new(center - Vec2::new(half, half), h, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 * self.h, j as f64 * self.h)
    }
    #[inline]
    pub fn node_at(&self, k: usize) -> Vec2 {
        self.node(k % self.nx, k / self.nx)
    }
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn nodes(&self) -> Vec<Vec2> {
        (0..self.len()).map(|k| self.node_at(k)).collect()
    }
    pub fn upper(&self) -> Vec2 {
        self.node(self.nx - 1, self.ny - 1)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        let fx = (x.x1 - self.origin.x1) / self.h;
        let fy = (x.x2 - self.origin.x2) / self.h;
        let tol = 1e-9;
        fx >= -tol && fy >= -tol && fx <= (self.nx - 1) as f64 + tol && fy <= (self.ny - 1) as f64 + tol
    }

    /// Node index if `x` coincides with a node.
    pub fn node_index_of(&self, x: Vec2) -> Option<usize> {
        let fx = (x.x1 - self.origin.x1) / self.h;
        let fy = (x.x2 - self.origin.x2) / self.h;
        let (i, j) = (fx.round(), fy.round());
        if (fx - i).abs() > 1e-9 || (fy - j).abs() > 1e-9 || i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (i < self.nx && j < self.ny).then(|| self.index(i, j))
    }

    /// Bicubic (Keys, a = -1/2) interpolation with quadratic ghost
    /// extrapolation at the window edges. `None` outside the window.
    pub fn interp<T: Interp>(&self, data: &[T], x: Vec2) -> Option<T> {
        if !self.contains(x) {
            return None;
        }
        let fx = ((x.x1 - self.origin.x1) / self.h).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((x.x2 - self.origin.x2) / self.h).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let wx = keys(fx - i as f64);
        let wy = keys(fy - j as f64);
        let row = |jj: usize| -> T {
            let base = jj * self.nx;
            let f = |ii: isize| -> T {
                if ii < 0 {
                    data[base] * 3.0 + data[base + 1] * -3.0 + data[base + 2]
                } else if ii as usize >= self.nx {
                    let n = self.nx;
                    data[base + n - 1] * 3.0 + data[base + n - 2] * -3.0 + data[base + n - 3]
                } else {
                    data[base + ii as usize]
                }
            };
            let i = i as isize;
            f(i - 1) * wx[0] + f(i) * wx[1] + f(i + 1) * wx[2] + f(i + 2) * wx[3]
        };
        let rows = |jj: isize| -> T {
            if jj < 0 {
                row(0) * 3.0 + row(1) * -3.0 + row(2)
            } else if jj as usize >= self.ny {
                let n = self.ny;
                row(n - 1) * 3.0 + row(n - 2) * -3.0 + row(n - 3)
            } else {
                row(jj as usize)
            }
        };
        let j = j as isize;
        Some(rows(j - 1) * wy[0] + rows(j) * wy[1] + rows(j + 1) * wy[2] + rows(j + 2) * wy[3])
    }

    /// Trapezoid weight of node `k` over the window.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let (i, j) = (k % self.nx, k / self.nx);
        let wi = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wj = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wi * wj * self.h * self.h
    }
}

#[inline]
fn keys(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Interpolable sample type.
pub trait Interp: Copy + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Add<Output = T> + Mul<f64, Output = T>> Interp for T {}

/// Symmetric 2x2 tensor `(s11, s12, s22)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl Sym2 {
    #[inline]
    pub fn outer(u: Vec2) -> Sym2 {
        Sym2 { s11: u.x1 * u.x1, s12: u.x1 * u.x2, s22: u.x2 * u.x2 }
    }
}
impl Add for Sym2 {
    type Output = Sym2;
    #[inline]
    fn add(self, o: Sym2) -> Sym2 {
        Sym2 { s11: self.s11 + o.s11, s12: self.s12 + o.s12, s22: self.s22 + o.s22 }
    }
}
impl Mul<f64> for Sym2 {
    type Output = Sym2;
    #[inline]
    fn mul(self, s: f64) -> Sym2 {
        Sym2 { s11: self.s11 * s, s12: self.s12 * s, s22: self.s22 * s }
    }
}
impl std::ops::Sub for Sym2 {
    type Output = Sym2;
    #[inline]
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2 { s11: self.s11 - o.s11, s12: self.s12 - o.s12, s22: self.s22 - o.s22 }
    }
}

/// Velocity sampled on a window grid, extended by `u0` outside it.
#[derive(Clone)]
pub struct VelocityField {
    pub grid: Grid,
    pub samples: Vec<Vec2>,
    pub outside: VectorFn,
}

impl VelocityField {
    pub fn new(grid: Grid, samples: Vec<Vec2>, outside: VectorFn) -> Result<Self, FieldError> {
        if samples.len() != grid.len() {
            return Err(FieldError::SizeMismatch { got: samples.len(), want: grid.len() });
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(k));
        }
        Ok(VelocityField { grid, samples, outside })
    }

    pub fn from_fn(grid: Grid, u: VectorFn) -> Self {
        let samples = grid.nodes().into_iter().map(|x| u(x)).collect();
        VelocityField { grid, samples, outside: u }
    }

    #[inline]
    pub fn at(&self, x: Vec2) -> Vec2 {
        self.grid.interp(&self.samples, x).unwrap_or_else(|| (self.outside)(x))
    }
}

impl std::fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VelocityField").field("grid", &self.grid).finish_non_exhaustive()
    }
}

/// Vorticity carried by back-to-label maps: `omega(t, x) = omega0(L(x))`
/// inside the window and `omega0(x)` outside.
#[derive(Clone)]
pub struct VorticityField {
    pub grid: Grid,
    pub labels: Vec<Vec2>,
    pub omega0: ScalarFn,
    pub domain: Domain,
}

impl VorticityField {
    #[inline]
    pub fn label(&self, x: Vec2) -> Vec2 {
        match self.grid.interp(&self.labels, x) {
            Some(l) => {
                if self.domain.has_boundary() && !self.domain.contains(l) {
                    self.domain.project_to_boundary(l)
                } else {
                    l
                }
            }
            None => x,
        }
    }
    #[inline]
    pub fn at(&self, x: Vec2) -> f64 {
        (self.omega0)(self.label(x))
    }
    /// `omega(t, x) - omega0(x)`, exactly zero outside the window.
    #[inline]
    pub fn diff(&self, x: Vec2) -> f64 {
        if !self.grid.contains(x) {
            return 0.0;
        }
        (self.omega0)(self.label(x)) - (self.omega0)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerfatiNorm {
    pub u_inf: f64,
    pub omega_inf: f64,
}

impl SerfatiNorm {
    pub fn total(&self) -> f64 {
        self.u_inf + self.omega_inf
    }
}

/// Sup of `|u|` over active nodes plus sup of the centred-difference curl
/// over nodes whose four neighbours are active.
pub fn serfati_norm(
    grid: &Grid,
    samples: &[Vec2],
    active: Option<&[bool]>,
) -> Result<SerfatiNorm, FieldError> {
    if grid.nx < 3 || grid.ny < 3 {
        return Err(FieldError::GridTooSmall(grid.nx, grid.ny));
    }
    if samples.len() != grid.len() {
        return Err(FieldError::SizeMismatch { got: samples.len(), want: grid.len() });
    }
    let act = |k: usize| active.is_none_or(|a| a[k]);
    let mut u_inf = 0.0f64;
    for (k, v) in samples.iter().enumerate() {
        if act(k) {
            if !v.is_finite() {
                return Err(FieldError::NonFinite(k));
            }
            u_inf = u_inf.max(v.norm());
        }
    }
    let curl = curl_on_grid(grid, samples, active);
    let omega_inf = curl.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SerfatiNorm { u_inf, omega_inf })
}

/// Centred-difference curl at interior nodes with four active neighbours.
pub fn curl_on_grid(grid: &Grid, samples: &[Vec2], active: Option<&[bool]>) -> Vec<Option<f64>> {
    let act = |k: usize| active.is_none_or(|a| a[k]);
    let mut out = vec![None; grid.len()];
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let k = grid.index(i, j);
            let (e, w, n, s) = (k + 1, k - 1, k + grid.nx, k - grid.nx);
            if !(act(k) && act(e) && act(w) && act(n) && act(s)) {
                continue;
            }
            let d1u2 = (samples[e].x2 - samples[w].x2) / (2.0 * grid.h);
            let d2u1 = (samples[n].x1 - samples[s].x1) / (2.0 * grid.h);
            out[k] = Some(d1u2 - d2u1);
        }
    }
    out
}

/// Windowed uniformly-local `L^p` estimate: sup over unit-area node blocks of
/// `(sum |w|^p h^2)^{1/p}`; `p = inf` gives the sup norm.
pub fn lp_uloc(grid: &Grid, values: &[f64], active: Option<&[bool]>, p: f64) -> Result<f64, FieldError> {
    let act = |k: usize| active.is_none_or(|a| a[k]);
    if p.is_infinite() {
        return Ok((0..grid.len()).filter(|&k| act(k)).fold(0.0f64, |m, k| m.max(values[k].abs())));
    }
    let b = ((1.0 / grid.h).round() as usize).max(1);
    if b > grid.nx || b > grid.ny {
        return Err(FieldError::WindowTooSmall(b));
    }
    let mut best = 0.0f64;
    for j0 in 0..=grid.ny - b {
        for i0 in 0..=grid.nx - b {
            let mut s = 0.0;
            for j in j0..j0 + b {
                for i in i0..i0 + b {
                    let k = grid.index(i, j);
                    if act(k) {
                        s += values[k].abs().powf(p);
                    }
                }
            }
            best = best.max(s * grid.h * grid.h);
        }
    }
    Ok(best.powf(1.0 / p))
}

/// `log+ r = max(-log r, 0)`.
#[inline]
pub fn log_plus(r: f64) -> f64 {
    (-r.ln()).max(0.0)
}

/// Log-Lipschitz norm estimate `sup|f| + sup |f(x)-f(y)| / ((1+log+|x-y|)|x-y|)`
/// over all sample pairs, or `pair_budget` seeded random pairs when that is
/// smaller.
pub fn ll_norm(samples: &[(Vec2, Vec2)], pair_budget: usize) -> f64 {
    let n = samples.len();
    let sup = samples.iter().fold(0.0f64, |m, (_, v)| m.max(v.norm()));
    let q = |a: usize, b: usize| -> f64 {
        let (x, fx) = samples[a];
        let (y, fy) = samples[b];
        let r = (x - y).norm();
        if r == 0.0 {
            return 0.0;
        }
        (fx - fy).norm() / ((1.0 + log_plus(r)) * r)
    };
    let mut best = 0.0f64;
    if n * (n.saturating_sub(1)) / 2 <= pair_budget {
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(q(a, b));
            }
        }
    } else {
        let mut rng = StdRng::seed_from_u64(0x5eed_0011);
        for _ in 0..pair_budget {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            best = best.max(q(a, b));
        }
        // nearest-neighbour pairs carry the log-Lipschitz quotient's worst case
        for a in 0..n.saturating_sub(1) {
            best = best.max(q(a, a + 1));
        }
    }
    sup + best
}

/// Disk containing the support of a compactly supported vorticity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportDisk {
    pub center: Vec2,
    pub radius: f64,
}

/// Quadrature nodes `(y, weight)` over `support` in polar coordinates
/// centred at `x`, clipped to the fluid.
pub fn support_rule(
    domain: &Domain,
    x: Vec2,
    support: &SupportDisk,
    spec: &QuadratureSpec,
) -> Vec<(Vec2, f64)> {
    let c = support.center;
    let rad = support.radius;
    let d = (x - c).norm();
    let mut out = Vec::new();
    let ray = |th: f64, wth: f64, out: &mut Vec<(Vec2, f64)>| {
        let e = Vec2::polar(1.0, th);
        let b = (x - c).dot(e);
        let disc = b * b - (d * d - rad * rad);
        if disc <= 0.0 {
            return;
        }
        let s = disc.sqrt();
        let (r1, r2) = ((-b - s).max(0.0), -b + s);
        if r2 <= r1 {
            return;
        }
        for (s0, s1) in domain.ray_segments(x, e, r2) {
            let a = s0.max(r1);
            if s1 <= a {
                continue;
            }
            for (r, w) in gauss_on(a, s1, spec.radial_nodes) {
                out.push((x + e * r, w * r * wth));
            }
        }
    };
    if d < rad {
        let n = spec.angular_nodes;
        let dth = 2.0 * PI / n as f64;
        for k in 0..n {
            ray((k as f64 + 0.5) * dth, dth, &mut out);
        }
    } else {
        let th0 = (c - x).x2.atan2((c - x).x1);
        let alpha = (rad / d).min(1.0).asin();
        for (th, w) in gauss_on(th0 - alpha, th0 + alpha, spec.angular_nodes) {
            ray(th, w, &mut out);
        }
    }
    out
}

/// Direct Biot-Savart sum `K_Omega[omega](x)` for compactly supported
/// vorticity.
pub fn direct_biot_savart(
    domain: &Domain,
    omega: &dyn Fn(Vec2) -> f64,
    support: Option<SupportDisk>,
    x: Vec2,
    spec: &QuadratureSpec,
) -> Result<Vec2, FieldError> {
    let support = support.ok_or(FieldError::MissingSupport)?;
    let mut acc = Vec2::ZERO;
    for (y, w) in support_rule(domain, x, &support, spec) {
        let wy = omega(y);
        if wy != 0.0 {
            acc += kernel_value(domain, x, y, KernelChoice::Domain) * (wy * w);
        }
    }
    Ok(acc)
}

/// `u0(x) + \int a_R(x-y) K_Omega(x,y) (omega_t - omega_0)(y) dy` for each
/// radius in `radii`.
#[allow(clippy::too_many_arguments)]
pub fn renormalized_bs(
    domain: &Domain,
    cutoff: &Cutoff,
    u0_at_x: Vec2,
    diff: &dyn Fn(Vec2) -> f64,
    support: Option<SupportDisk>,
    x: Vec2,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Vec<Vec2> {
    let nodes: Vec<(Vec2, f64, Vec2)> = match support {
        Some(s) => support_rule(domain, x, &s, spec)
            .into_iter()
            .map(|(y, w)| (y, w * diff(y), kernel_value(domain, x, y, KernelChoice::Domain)))
            .collect(),
        None => Vec::new(),
    };
    radii
        .iter()
        .map(|&r| {
            let mut acc = u0_at_x;
            if support.is_some() {
                for &(y, wd, k) in &nodes {
                    acc += k * (wd * cutoff.a_eps(x - y, r));
                }
            } else {
                let rb = cutoff.c_outer * r;
                let v = crate::quadrature::singular_polar_integral(domain, x, rb, spec, |y| {
                    kernel_value(domain, x, y, KernelChoice::Domain) * (cutoff.a_eps(x - y, r) * diff(y))
                })
                .unwrap_or(Vec2::ZERO);
                acc += v;
            }
            acc
        })
        .collect()
}
