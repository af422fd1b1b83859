//! Shipped flows: Yudovich blobs, the shear strip, the radial exterior
//! vortex, a disk-exterior blob, a periodic cellular flow, the Galilean
//! non-example, and constructors that refuse data outside the solution class.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{serfati_norm, Grid, ScalarFn, SerfatiNorm, SupportDisk, VectorFn};
use crate::geometry::{image_point, Domain, Vec2};
use crate::quadrature::gauss_on;
use crate::serfati::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'")]
    Unknown(String),
    #[error("scenario '{name}' is outside the solution class: {reason}")]
    NotSerfati { name: &'static str, reason: &'static str },
    #[error("invalid scenario parameter: {0}")]
    BadParameter(String),
    #[error("scenario '{0}' is experimental; enable experimental scenarios to run it")]
    Experimental(String),
}

/// A time-dependent reference trajectory `u(t, x)`.
pub type TrajectoryFn = Arc<dyn Fn(f64, Vec2) -> Vec2 + Send + Sync>;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub u0: VectorFn,
    pub omega0: ScalarFn,
    /// Exact `sup |omega0|` over the fluid.
    pub omega0_sup: f64,
    /// Exact or tight `sup |u0|` over the fluid.
    pub u0_sup: f64,
    pub support: Option<SupportDisk>,
    pub window_center: Vec2,
    pub window_half: f64,
    pub stationary: bool,
    pub experimental: bool,
    /// Known exact trajectory, if any.
    pub exact_u: Option<TrajectoryFn>,
    /// Known exact back-to-labels map `X^{-1}(t, x)`, if any.
    pub exact_labels: Option<TrajectoryFn>,
    /// Whether the scenario is a solution of the identity (the Galilean
    /// example is not).
    pub serfati: bool,
}

/// A scenario's exact flow: reference velocity, vorticity carried by the
/// exact labels (or frozen when the scenario is stationary).
#[derive(Clone)]
pub struct ExactTrajectory {
    u: TrajectoryFn,
    labels: Option<TrajectoryFn>,
    omega0: ScalarFn,
    speed_bound: f64,
}

impl Trajectory for ExactTrajectory {
    fn velocity(&self, t: f64, y: Vec2) -> Vec2 {
        (self.u)(t, y)
    }
    fn vorticity(&self, t: f64, y: Vec2) -> f64 {
        match &self.labels {
            Some(l) => (self.omega0)(l(t, y)),
            None => (self.omega0)(y),
        }
    }
    fn speed_bound(&self) -> f64 {
        self.speed_bound
    }
}

impl Scenario {
    /// Exact trajectory up to time `t_max`, when the scenario has one. The
    /// speed bound is `u0_sup` raised by samples of the window at 0, t/2, t.
    pub fn exact_trajectory(&self, t_max: f64) -> Option<ExactTrajectory> {
        let u = self.exact_u.clone()?;
        if self.exact_labels.is_none() && !self.stationary {
            return None;
        }
        let mut speed = self.u0_sup;
        let half = self.window_half;
        for j in 0..=20 {
            for i in 0..=20 {
                let y = self.window_center + Vec2::new(half * (i as f64 / 10.0 - 1.0), half * (j as f64 / 10.0 - 1.0));
                for s in [0.0, 0.5 * t_max, t_max] {
                    speed = speed.max(u(s, y).norm());
                }
            }
        }
        Some(ExactTrajectory { u, labels: self.exact_labels.clone(), omega0: self.omega0.clone(), speed_bound: speed })
    }
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("domain", &self.domain.kind())
            .field("stationary", &self.stationary)
            .field("experimental", &self.experimental)
            .finish_non_exhaustive()
    }
}

/// Parameters accepted by `build`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub amplitude: Option<f64>,
    pub radius: Option<f64>,
    /// Strength of the off-centre bump added to the blob.
    pub perturbation: Option<f64>,
}

pub const SHIPPED: &[&str] = &["blob", "perturbed-blob", "strip", "radial-exterior", "disk-blob", "periodic", "galilean-nonexample"];

pub fn build(name: &str, params: &ScenarioParams) -> Result<Scenario, ScenarioError> {
    let amp = params.amplitude.unwrap_or(4.0);
    let rad = params.radius.unwrap_or(1.0);
    if !(amp.is_finite() && rad > 0.0) {
        return Err(ScenarioError::BadParameter(format!("amplitude={amp}, radius={rad}")));
    }
    match name {
        "blob" => Ok(blob(amp, rad)),
        "perturbed-blob" => Ok(perturbed_blob(amp, rad, params.perturbation.unwrap_or(1e-3))),
        "strip" => Ok(strip()),
        "radial-exterior" => Ok(radial_exterior()),
        "disk-blob" => Ok(disk_blob(params.amplitude.unwrap_or(2.0), params.radius.unwrap_or(0.5))),
        "periodic" => Ok(periodic()),
        "galilean-nonexample" => Ok(galilean()),
        "constant-vorticity" => constant_vorticity().map(|_| unreachable!()),
        "semi-infinite-strip" => semi_infinite_strip().map(|_| unreachable!()),
        _ => Err(ScenarioError::Unknown(name.to_string())),
    }
}

fn rotate(z: Vec2, a: f64) -> Vec2 {
    let (s, c) = a.sin_cos();
    Vec2::new(c * z.x1 - s * z.x2, s * z.x1 + c * z.x2)
}

/// `A (1 - |y-c|^2/R^2)^4` on `|y - c| < R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBump {
    pub center: Vec2,
    pub amplitude: f64,
    pub radius: f64,
}

impl RadialBump {
    #[inline]
    pub fn omega(&self, y: Vec2) -> f64 {
        let s = 1.0 - (y - self.center).norm_sq() / (self.radius * self.radius);
        if s > 0.0 {
            let s2 = s * s;
            self.amplitude * s2 * s2
        } else {
            0.0
        }
    }
    /// Exact velocity `Gamma(r) / (2 pi r) e_theta`.
    #[inline]
    pub fn velocity(&self, y: Vec2) -> Vec2 {
        let z = y - self.center;
        let r2 = z.norm_sq();
        if r2 == 0.0 {
            return Vec2::ZERO;
        }
        let rr = self.radius * self.radius;
        let s = (1.0 - r2 / rr).max(0.0);
        let s5 = s * s * s * s * s;
        z.perp() * (self.amplitude * rr * (1.0 - s5) / (10.0 * r2))
    }
    pub fn mass(&self) -> f64 {
        PI * self.amplitude * self.radius * self.radius / 5.0
    }
    /// `sup |u|`, attained inside the support.
    pub fn speed_sup(&self) -> f64 {
        let mut m = 0.0f64;
        for k in 1..=2000 {
            let r = self.radius * k as f64 / 2000.0;
            m = m.max(self.velocity(self.center + Vec2::new(r, 0.0)).norm());
        }
        m
    }
    pub fn support(&self) -> SupportDisk {
        SupportDisk { center: self.center, radius: self.radius }
    }
}

fn blob(amp: f64, rad: f64) -> Scenario {
    let b = RadialBump { center: Vec2::ZERO, amplitude: amp, radius: rad };
    Scenario {
        name: "blob".into(),
        domain: Domain::FullPlane,
        u0: Arc::new(move |y| b.velocity(y)),
        omega0: Arc::new(move |y| b.omega(y)),
        omega0_sup: amp.abs(),
        u0_sup: b.speed_sup(),
        support: Some(b.support()),
        window_center: Vec2::ZERO,
        window_half: 2.0 * rad,
        stationary: true,
        experimental: false,
        exact_u: Some(Arc::new(move |_t, y| b.velocity(y))),
        exact_labels: Some(Arc::new(move |t, y| {
            // differential rotation about the centre at angular speed |u|/r
            let z = y - b.center;
            let r = z.norm();
            if r == 0.0 {
                return y;
            }
            let w = b.velocity(y).dot(z.perp()) / (r * r);
            b.center + rotate(z, -w * t)
        })),
        serfati: true,
    }
}

/// Bump used to perturb the blob.
pub fn perturbation_bump() -> RadialBump {
    RadialBump { center: Vec2::new(0.5, 0.0), amplitude: 1.0, radius: 0.3 }
}

/// Amplitude of the perturbation bump whose velocity has S-norm `s0`.
pub fn perturbation_amplitude(s0: f64) -> f64 {
    let unit = perturbation_bump();
    s0 / (1.0 + unit.speed_sup())
}

/// Blob plus a bump whose difference from the blob has S-norm `s0`.
fn perturbed_blob(amp: f64, rad: f64, s0: f64) -> Scenario {
    let b = RadialBump { center: Vec2::ZERO, amplitude: amp, radius: rad };
    let delta = perturbation_amplitude(s0);
    let p = RadialBump { amplitude: delta, ..perturbation_bump() };
    let mut sup_u = 0.0f64;
    for j in 0..400 {
        for i in 0..400 {
            let y = Vec2::new(-rad + 2.0 * rad * i as f64 / 399.0, -rad + 2.0 * rad * j as f64 / 399.0);
            sup_u = sup_u.max((b.velocity(y) + p.velocity(y)).norm());
        }
    }
    // for small perturbations the peak stays at the blob centre
    let omega0_sup = if delta.abs() <= 0.5 && rad >= 1.0 { amp.abs() } else { amp.abs() + delta.abs() };
    Scenario {
        name: "perturbed-blob".into(),
        domain: Domain::FullPlane,
        u0: Arc::new(move |y| b.velocity(y) + p.velocity(y)),
        omega0: Arc::new(move |y| b.omega(y) + p.omega(y)),
        omega0_sup,
        u0_sup: sup_u,
        support: Some(SupportDisk { center: Vec2::ZERO, radius: rad.max(0.8) }),
        window_center: Vec2::ZERO,
        window_half: 2.0 * rad,
        stationary: false,
        experimental: false,
        exact_u: None,
        exact_labels: None,
        serfati: true,
    }
}

/// Shear layer `u = (clamp(x2 - 2, 0, 1), 0)` outside the unit disk; its
/// vorticity is minus the indicator of `2 < x2 < 3`.
fn strip() -> Scenario {
    let u = |y: Vec2| Vec2::new((y.x2 - 2.0).clamp(0.0, 1.0), 0.0);
    Scenario {
        name: "strip".into(),
        domain: Domain::ExteriorUnitDisk,
        u0: Arc::new(u),
        omega0: Arc::new(|y: Vec2| if y.x2 > 2.0 && y.x2 < 3.0 { -1.0 } else { 0.0 }),
        omega0_sup: 1.0,
        u0_sup: 1.0,
        support: None,
        window_center: Vec2::new(0.0, 1.5),
        window_half: 2.5,
        stationary: true,
        experimental: false,
        exact_u: Some(Arc::new(move |_t, y| u(y))),
        exact_labels: Some(Arc::new(move |t, y| y - u(y) * t)),
        serfati: true,
    }
}

/// `u = x^perp / |x|`, `omega = 1/|x|` outside the unit disk.
fn radial_exterior() -> Scenario {
    let u = |y: Vec2| {
        let r = y.norm();
        if r == 0.0 {
            Vec2::ZERO
        } else {
            y.perp() / r
        }
    };
    Scenario {
        name: "radial-exterior".into(),
        domain: Domain::ExteriorUnitDisk,
        u0: Arc::new(u),
        omega0: Arc::new(|y: Vec2| {
            let r = y.norm();
            if r == 0.0 {
                0.0
            } else {
                1.0 / r
            }
        }),
        omega0_sup: 1.0,
        u0_sup: 1.0,
        support: None,
        window_center: Vec2::ZERO,
        window_half: 3.0,
        stationary: true,
        experimental: false,
        exact_u: Some(Arc::new(move |_t, y| u(y))),
        exact_labels: Some(Arc::new(|t, y: Vec2| {
            let r = y.norm();
            rotate(y, -t / r)
        })),
        serfati: true,
    }
}

/// Velocity induced on the disk exterior by a blob, `K_Omega[omega]`, with
/// the image part evaluated by a multipole expansion about the image centre.
#[derive(Clone, Debug)]
pub struct DiskBlobField {
    pub bump: RadialBump,
    z0: Complex64,
    moments: Vec<Complex64>,
}

impl DiskBlobField {
    pub fn new(bump: RadialBump) -> Self {
        let z0 = image_point(bump.center).map(|p| p.to_c()).unwrap_or_default();
        let terms = 24;
        let mut moments = vec![Complex64::new(0.0, 0.0); terms];
        for (r, wr) in gauss_on(0.0, bump.radius, 48) {
            for k in 0..96 {
                let th = 2.0 * PI * k as f64 / 96.0;
                let y = bump.center + Vec2::polar(r, th);
                let w = bump.omega(y) * wr * r * 2.0 * PI / 96.0;
                let ys = y.to_c() / y.norm_sq();
                let d = ys - z0;
                let mut p = Complex64::new(w, 0.0);
                for m in moments.iter_mut() {
                    *m += p;
                    p *= d;
                }
            }
        }
        DiskBlobField { bump, z0, moments }
    }

    /// `\int K(x - y*) omega(y) dy`.
    pub fn image_velocity(&self, x: Vec2) -> Vec2 {
        let dz = x.to_c() - self.z0;
        let inv = 1.0 / dz;
        let mut p = inv;
        let mut s = Complex64::new(0.0, 0.0);
        for m in &self.moments {
            s += m * p;
            p *= inv;
        }
        // u1 - i u2 = s / (2 pi i)
        let c = s / Complex64::new(0.0, 2.0 * PI);
        Vec2::new(c.re, -c.im)
    }

    pub fn velocity(&self, x: Vec2) -> Vec2 {
        self.bump.velocity(x) - self.image_velocity(x)
    }
}

fn disk_blob(amp: f64, rad: f64) -> Scenario {
    let b = RadialBump { center: Vec2::new(3.0, 0.0), amplitude: amp, radius: rad };
    let field = Arc::new(DiskBlobField::new(b));
    let f1 = field.clone();
    let mut sup_u = 0.0f64;
    for j in 0..200 {
        for i in 0..200 {
            let y = Vec2::new(-1.0 + 6.0 * i as f64 / 199.0, -3.0 + 6.0 * j as f64 / 199.0);
            if y.norm() > 1.0 {
                sup_u = sup_u.max(field.velocity(y).norm());
            }
        }
    }
    Scenario {
        name: "disk-blob".into(),
        domain: Domain::ExteriorUnitDisk,
        u0: Arc::new(move |y| f1.velocity(y)),
        omega0: Arc::new(move |y| b.omega(y)),
        omega0_sup: amp.abs(),
        u0_sup: sup_u,
        support: Some(b.support()),
        window_center: Vec2::new(1.5, 0.0),
        window_half: 3.0,
        stationary: false,
        experimental: false,
        exact_u: None,
        exact_labels: None,
        serfati: true,
    }
}

/// Steady cellular flow `omega = sin x1 sin x2` (zero mean per period).
fn periodic() -> Scenario {
    let u = |y: Vec2| {
        let (s1, c1) = y.x1.sin_cos();
        let (s2, c2) = y.x2.sin_cos();
        Vec2::new(0.5 * s1 * c2, -0.5 * c1 * s2)
    };
    Scenario {
        name: "periodic".into(),
        domain: Domain::FullPlane,
        u0: Arc::new(u),
        omega0: Arc::new(|y: Vec2| y.x1.sin() * y.x2.sin()),
        omega0_sup: 1.0,
        u0_sup: 0.5,
        support: None,
        window_center: Vec2::ZERO,
        window_half: PI,
        stationary: true,
        experimental: true,
        exact_u: Some(Arc::new(move |_t, y| u(y))),
        exact_labels: None,
        serfati: true,
    }
}

/// `u(t) = (t, 0)`: smooth, curl-free, but not a solution of the identity.
fn galilean() -> Scenario {
    Scenario {
        name: "galilean-nonexample".into(),
        domain: Domain::FullPlane,
        u0: Arc::new(|_| Vec2::ZERO),
        omega0: Arc::new(|_| 0.0),
        omega0_sup: 0.0,
        u0_sup: 0.0,
        support: None,
        window_center: Vec2::ZERO,
        window_half: 1.0,
        stationary: false,
        experimental: false,
        exact_u: Some(Arc::new(|t, _| Vec2::new(t, 0.0))),
        exact_labels: Some(Arc::new(|t, y: Vec2| y - Vec2::new(0.5 * t * t, 0.0))),
        serfati: false,
    }
}

/// Constant vorticity forces velocity growing linearly at infinity.
pub fn constant_vorticity() -> Result<Scenario, ScenarioError> {
    Err(ScenarioError::NotSerfati {
        name: "constant-vorticity",
        reason: "no bounded velocity has constant nonzero vorticity",
    })
}

/// A semi-infinite strip boundary is not the exterior of a compact obstacle.
pub fn semi_infinite_strip() -> Result<Scenario, ScenarioError> {
    Err(ScenarioError::NotSerfati {
        name: "semi-infinite-strip",
        reason: "the domain is not the exterior of a single compact obstacle",
    })
}

/// Static consistency checks of a scenario's initial data on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValidation {
    pub name: String,
    pub h: f64,
    /// `max |curl_h u0 - omega0|` over nodes whose stencil sees no jump of `omega0`.
    pub curl_error: f64,
    /// `max |div_h u0|` over fluid nodes.
    pub divergence: f64,
    /// `max |u0 . n|` over 512 boundary samples.
    pub tangency: Option<f64>,
    pub s_norm: SerfatiNorm,
    pub checked_nodes: usize,
}

/// Curl consistency, divergence, tangency and the Serfati norm of `u0` on
/// the scenario window at spacing `h`.
pub fn validate(sc: &Scenario, h: f64) -> Result<ScenarioValidation, ScenarioError> {
    if !(h > 0.0) || h > sc.window_half {
        return Err(ScenarioError::BadParameter(format!("grid spacing h={h}")));
    }
    let n = (2.0 * sc.window_half / h).round() as usize + 1;
    let grid = Grid::square(sc.window_center, sc.window_half, n.max(3))
        .map_err(|e| ScenarioError::BadParameter(e.to_string()))?;
    let h = grid.h;
    let u = &sc.u0;
    let w = &sc.omega0;
    let e1 = Vec2::new(h, 0.0);
    let e2 = Vec2::new(0.0, h);
    let jump_tol = 0.25 * sc.omega0_sup.max(f64::MIN_POSITIVE);
    let mut curl_error = 0.0f64;
    let mut divergence = 0.0f64;
    let mut checked = 0;
    for x in grid.nodes() {
        let stencil = [x, x + e1, x - e1, x + e2, x - e2];
        if !stencil.iter().all(|p| sc.domain.contains(*p)) {
            continue;
        }
        let (ue, uw, un, us) = (u(x + e1), u(x - e1), u(x + e2), u(x - e2));
        divergence = divergence.max(((ue.x1 - uw.x1) + (un.x2 - us.x2)).abs() / (2.0 * h));
        let ws: Vec<f64> = stencil.iter().map(|p| w(*p)).collect();
        let (lo, hi) = ws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if hi - lo > jump_tol {
            continue;
        }
        let curl = ((ue.x2 - uw.x2) - (un.x1 - us.x1)) / (2.0 * h);
        curl_error = curl_error.max((curl - ws[0]).abs());
        checked += 1;
    }
    let tangency = if sc.domain.has_boundary() {
        let b = sc.domain.boundary_sample(512).map_err(|e| ScenarioError::BadParameter(e.to_string()))?;
        Some(b.nodes.iter().map(|p| u(p.y).dot(p.n).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    let active: Vec<bool> = grid.nodes().iter().map(|x| sc.domain.contains(*x)).collect();
    let samples: Vec<Vec2> = grid.nodes().iter().zip(&active).map(|(x, a)| if *a { u(*x) } else { Vec2::ZERO }).collect();
    let s_norm = serfati_norm(&grid, &samples, Some(&active)).map_err(|e| ScenarioError::BadParameter(e.to_string()))?;
    Ok(ScenarioValidation { name: sc.name.clone(), h, curl_error, divergence, tangency, s_norm, checked_nodes: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::direct_biot_savart;
    use crate::quadrature::QuadratureSpec;

    #[test]
    fn bump_velocity_matches_direct_sum() {
        let b = RadialBump { center: Vec2::new(0.2, -0.1), amplitude: 4.0, radius: 1.0 };
        let spec = QuadratureSpec::default();
        for &x in &[Vec2::new(0.5, 0.3), Vec2::new(2.0, -1.0)] {
            let d = direct_biot_savart(&Domain::FullPlane, &|y| b.omega(y), Some(b.support()), x, &spec).unwrap();
            assert!((d - b.velocity(x)).norm() < 1e-9);
        }
    }

    #[test]
    fn disk_blob_matches_direct_domain_sum() {
        let b = RadialBump { center: Vec2::new(3.0, 0.0), amplitude: 2.0, radius: 0.5 };
        let f = DiskBlobField::new(b);
        let spec = QuadratureSpec::default();
        for &x in &[Vec2::new(1.2, 0.3), Vec2::new(-1.0, -0.5), Vec2::new(3.1, 0.2)] {
            let d = direct_biot_savart(&Domain::ExteriorUnitDisk, &|y| b.omega(y), Some(b.support()), x, &spec).unwrap();
            assert!((d - f.velocity(x)).norm() < 1e-9, "{x:?}: {d:?} {:?}", f.velocity(x));
        }
        // tangency on the boundary
        for k in 0..12 {
            let x = Vec2::polar(1.0, 0.5 * k as f64);
            assert!(f.velocity(x).dot(x).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_constructors_refuse() {
        assert!(matches!(build("constant-vorticity", &Default::default()), Err(ScenarioError::NotSerfati { .. })));
        assert!(matches!(build("semi-infinite-strip", &Default::default()), Err(ScenarioError::NotSerfati { .. })));
        assert!(matches!(build("nope", &Default::default()), Err(ScenarioError::Unknown(_))));
    }
}
