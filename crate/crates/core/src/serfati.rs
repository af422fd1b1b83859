//! Velocity reconstruction through the Serfati identity
//!
//! u(t,x) = u0(x) + \int a_eps(x-y) G(x,y) (omega(t,y) - omega0(y)) dy
//!          - \int_0^t \int W(x,y) : (u (x) u)(s,y) dy ds
//!          - Kbar(x)/2 \int_0^t \int_Gamma |u|^2 grad a_eps(x-y) . tau dsigma ds
//!
//! with `G` the domain or hydrodynamic kernel and `W` its far-field weight.
//! The boundary line only appears on exterior domains with the hydrodynamic
//! kernel.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Grid, Sym2, VectorFn, VorticityField};
use crate::geometry::{BoundarySample, Domain, GeometryError, Vec2};
use crate::kernels::{
    domain_jet, kbar_raw, kernel_value, weights_from_jet, Cutoff, KernelChoice, KernelError,
};
use crate::quadrature::{far_panels, gauss_legendre, polar_nodes, QuadratureError, QuadratureSpec, RadialPanel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SerfatiError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
    #[error("point {0:?} is not a reconstruction probe")]
    NotAProbe(Vec2),
    #[error("fitted constant {fitted} is below the initial velocity sup {u_inf}")]
    EnvelopeBelowData { fitted: f64, u_inf: f64 },
}

/// Everything the identity needs besides the flow itself.
#[derive(Clone, Debug)]
pub struct SerfatiSetup {
    pub domain: Domain,
    pub cutoff: Cutoff,
    pub eps: f64,
    pub quad: QuadratureSpec,
    pub kernel: KernelChoice,
}

impl SerfatiSetup {
    /// Hydrodynamic kernel on exterior domains, free kernel on the plane.
    pub fn new(domain: Domain, eps: f64, quad: QuadratureSpec) -> Result<Self, SerfatiError> {
        let kernel = if domain.has_boundary() {
            KernelChoice::Hydrodynamic
        } else {
            KernelChoice::Domain
        };
        let s = SerfatiSetup { domain, cutoff: Cutoff::default(), eps, quad, kernel };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SerfatiError> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(SerfatiError::InvalidSetup(format!("epsilon must be > 0, got {}", self.eps)));
        }
        self.quad.validate()?;
        let rt = self.quad.truncation_for(self.eps);
        if rt <= 2.0 * self.cutoff.c_outer * self.eps {
            return Err(SerfatiError::InvalidSetup(format!(
                "truncation radius {rt} must exceed 2 c_outer eps"
            )));
        }
        Ok(())
    }

    /// Whether the boundary line term is present.
    pub fn has_boundary_term(&self) -> bool {
        self.domain.has_boundary() && self.kernel == KernelChoice::Hydrodynamic
    }

    pub fn truncation(&self) -> f64 {
        self.quad.truncation_for(self.eps)
    }

    pub(crate) fn near_panels(&self) -> [RadialPanel; 2] {
        let n1 = (self.quad.radial_nodes / 2).max(1);
        let n2 = (self.quad.radial_nodes - n1).max(1);
        let ri = self.cutoff.c_inner * self.eps;
        let ro = self.cutoff.c_outer * self.eps;
        [RadialPanel { a: 0.0, b: ri, n: n1 }, RadialPanel { a: ri, b: ro, n: n2 }]
    }

    pub(crate) fn far_panels_to(&self, r_max: f64) -> Vec<RadialPanel> {
        far_panels(
            self.cutoff.c_inner * self.eps,
            self.cutoff.c_outer * self.eps,
            r_max,
            &self.quad,
        )
    }

    /// `sup_theta R^3 |W(x, x + R e_theta)|` at the truncation radius, with a
    /// 25% margin; sets the tail bound `2 pi C U^2 / R`.
    pub fn tail_coefficient(&self, x: Vec2) -> f64 {
        let r = self.truncation();
        let mut c = 0.0f64;
        for k in 0..32 {
            let y = x + Vec2::polar(r, (k as f64 + 0.5) * PI / 16.0);
            if !self.domain.contains(y) {
                continue;
            }
            let w = crate::kernels::farfield_weights(&self.domain, &self.cutoff, self.eps, x, y, self.kernel);
            let f: f64 = w.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
            c = c.max(f * r * r * r);
        }
        1.25 * c
    }

    /// Tail bound per unit time for velocities bounded by `u_sup`.
    pub fn tail_rate(&self, x: Vec2, u_sup: f64) -> f64 {
        2.0 * PI * self.tail_coefficient(x) * u_sup * u_sup / self.truncation()
    }
}

/// Symmetric contraction coefficients `(W11, W12 + W21, W22)` per component.
pub type SymWeight = [[f64; 3]; 2];

#[inline]
fn sym_weight(w: &[[[f64; 2]; 2]; 2], scale: f64) -> SymWeight {
    let mut o = [[0.0; 3]; 2];
    for j in 0..2 {
        o[j] = [w[j][0][0] * scale, (w[j][0][1] + w[j][1][0]) * scale, w[j][1][1] * scale];
    }
    o
}

#[inline]
fn contract(w: &SymWeight, p: Sym2) -> Vec2 {
    Vec2::new(
        w[0][0] * p.s11 + w[0][1] * p.s12 + w[0][2] * p.s22,
        w[1][0] * p.s11 + w[1][1] * p.s12 + w[1][2] * p.s22,
    )
}

/// `\int a_eps(x-y) G(x,y) diff(y) dy` over the cutoff ball.
pub fn near_field_term(
    setup: &SerfatiSetup,
    x: Vec2,
    diff: &dyn Fn(Vec2) -> f64,
) -> Result<Vec2, SerfatiError> {
    setup.validate()?;
    if !setup.domain.contains_closure(x, 1e-12) {
        return Err(KernelError::OutsideDomain(x).into());
    }
    let mut acc = Vec2::ZERO;
    for (y, w) in polar_nodes(&setup.domain, x, &setup.near_panels(), setup.quad.angular_nodes) {
        let d = diff(y);
        if d != 0.0 {
            let a = setup.cutoff.a_eps(x - y, setup.eps);
            acc += kernel_value(&setup.domain, x, y, setup.kernel) * (w * a * d);
        }
    }
    Ok(acc)
}

/// Far-field integral and its tail bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarValue {
    pub value: Vec2,
    pub tail: f64,
}

/// `\int W(x,y) : P(y) dy` over `c_inner eps <= |x-y| <= R`; `u_sup` bounds
/// `|P|` beyond `R` for the tail.
pub fn far_field_term(
    setup: &SerfatiSetup,
    x: Vec2,
    tensor: &dyn Fn(Vec2) -> Sym2,
    u_sup: f64,
) -> Result<FarValue, SerfatiError> {
    setup.validate()?;
    if !setup.domain.contains_closure(x, 1e-12) {
        return Err(KernelError::OutsideDomain(x).into());
    }
    let panels = setup.far_panels_to(setup.truncation());
    let mut acc = Vec2::ZERO;
    for (y, w) in polar_nodes(&setup.domain, x, &panels, setup.quad.far_angles()) {
        let jet = domain_jet(&setup.domain, x, y, setup.kernel);
        let ww = weights_from_jet(&jet, &setup.cutoff, setup.eps, x - y);
        acc += contract(&sym_weight(&ww, w), tensor(y));
    }
    Ok(FarValue { value: acc, tail: setup.tail_rate(x, u_sup) })
}

/// Trapezoid-in-time far-field increment over `[s, s + dt]`.
pub fn far_field_increment(
    setup: &SerfatiSetup,
    x: Vec2,
    u_left: &dyn Fn(Vec2) -> Vec2,
    u_right: &dyn Fn(Vec2) -> Vec2,
    dt: f64,
    u_sup: f64,
) -> Result<FarValue, SerfatiError> {
    let f = far_field_term(setup, x, &|y| (Sym2::outer(u_left(y)) + Sym2::outer(u_right(y))) * 0.5, u_sup)?;
    Ok(FarValue { value: f.value * dt, tail: f.tail * dt })
}

/// Boundary line coefficient vectors `c_k` with
/// `Kbar(x)/2 \int |u|^2 grad a_eps(x-y).tau dsigma = sum_k c_k |u(y_k)|^2`.
pub fn boundary_coefficients(setup: &SerfatiSetup, x: Vec2, sample: &BoundarySample) -> Vec<(usize, Vec2)> {
    if !setup.has_boundary_term() {
        return Vec::new();
    }
    let kb = kbar_raw(&setup.domain, x) * 0.5;
    let dsig = sample.weight();
    let ro = setup.cutoff.c_outer * setup.eps;
    let ri = setup.cutoff.c_inner * setup.eps;
    sample
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(k, nd)| {
            let v = x - nd.y;
            let r = v.norm();
            if r <= ri || r >= ro {
                return None;
            }
            let (_, ga, _) = setup.cutoff.a_eps_jet(v, setup.eps);
            let s = ga.dot(nd.tau) * dsig;
            (s != 0.0).then(|| (k, kb * s))
        })
        .collect()
}

/// Boundary-line increment over `[s, s + dt]` from boundary speeds squared at
/// both ends.
pub fn boundary_increment(
    setup: &SerfatiSetup,
    x: Vec2,
    sample: &BoundarySample,
    speed_sq_left: &[f64],
    speed_sq_right: &[f64],
    dt: f64,
) -> Result<Vec2, SerfatiError> {
    if speed_sq_left.len() != sample.nodes.len() || speed_sq_right.len() != sample.nodes.len() {
        return Err(SerfatiError::InvalidSetup("boundary speed samples do not match the sample".into()));
    }
    let mut acc = Vec2::ZERO;
    for (k, c) in boundary_coefficients(setup, x, sample) {
        acc += c * (0.5 * dt * (speed_sq_left[k] + speed_sq_right[k]));
    }
    Ok(acc)
}

/// A-priori velocity envelope `C e^{C t}` from the fitted constant.
pub fn apriori_velocity_bound(u0_inf: f64, t: f64, fitted_c: f64) -> Result<f64, SerfatiError> {
    if fitted_c < u0_inf {
        return Err(SerfatiError::EnvelopeBelowData { fitted: fitted_c, u_inf: u0_inf });
    }
    Ok(fitted_c * (fitted_c * t).exp())
}

/// A candidate flow `(u, omega)` defined for all times and points.
pub trait Trajectory: Sync {
    fn velocity(&self, t: f64, y: Vec2) -> Vec2;
    fn vorticity(&self, t: f64, y: Vec2) -> f64;
    /// Bound on `|u|` used for the far-field tail.
    fn speed_bound(&self) -> f64;
}

/// Closure-backed trajectory.
pub struct FnTrajectory<U, W>
where
    U: Fn(f64, Vec2) -> Vec2 + Sync,
    W: Fn(f64, Vec2) -> f64 + Sync,
{
    pub u: U,
    pub omega: W,
    pub speed_bound: f64,
}

impl<U, W> Trajectory for FnTrajectory<U, W>
where
    U: Fn(f64, Vec2) -> Vec2 + Sync,
    W: Fn(f64, Vec2) -> f64 + Sync,
{
    fn velocity(&self, t: f64, y: Vec2) -> Vec2 {
        (self.u)(t, y)
    }
    fn vorticity(&self, t: f64, y: Vec2) -> f64 {
        (self.omega)(t, y)
    }
    fn speed_bound(&self) -> f64 {
        self.speed_bound
    }
}

/// Identity residual and the quadrature budget it should respect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: Vec2,
    pub near: Vec2,
    pub far: Vec2,
    pub boundary: Vec2,
    /// Tail bound plus a refinement-difference estimate plus `target_tol`.
    pub budget: f64,
}

fn residual_once(
    setup: &SerfatiSetup,
    traj: &dyn Trajectory,
    x: Vec2,
    t: f64,
    time_nodes: usize,
    sample: Option<&BoundarySample>,
) -> Result<(Vec2, Vec2, Vec2, f64), SerfatiError> {
    let near = near_field_term(setup, x, &|y| traj.vorticity(t, y) - traj.vorticity(0.0, y))?;
    let (gx, gw) = gauss_legendre(time_nodes.max(1));
    let mut far = Vec2::ZERO;
    let mut bnd = Vec2::ZERO;
    let mut tail = 0.0;
    let coeffs = sample.map(|s| boundary_coefficients(setup, x, s)).unwrap_or_default();
    for (&g, &w) in gx.iter().zip(&gw) {
        let s = 0.5 * t * (g + 1.0);
        let ws = 0.5 * t * w;
        let f = far_field_term(setup, x, &|y| Sym2::outer(traj.velocity(s, y)), traj.speed_bound())?;
        far += f.value * ws;
        tail += f.tail * ws;
        if let Some(smp) = sample {
            for &(k, c) in &coeffs {
                bnd += c * (traj.velocity(s, smp.nodes[k].y).norm_sq() * ws);
            }
        }
    }
    Ok((near, far, bnd, tail))
}

/// `u(t,x) - [u(0,x) + near - far - boundary]` for a supplied trajectory.
pub fn serfati_residual(
    setup: &SerfatiSetup,
    traj: &dyn Trajectory,
    x: Vec2,
    t: f64,
    time_nodes: usize,
) -> Result<Residual, SerfatiError> {
    let sample = if setup.has_boundary_term() {
        Some(setup.domain.boundary_sample(512)?)
    } else {
        None
    };
    let (near, far, bnd, tail) = residual_once(setup, traj, x, t, time_nodes, sample.as_ref())?;
    let fine = SerfatiSetup {
        quad: QuadratureSpec {
            radial_nodes: setup.quad.radial_nodes * 2,
            angular_nodes: setup.quad.angular_nodes * 2,
            far_angular_nodes: setup.quad.far_angular_nodes.map(|n| n * 2),
            transition_nodes: setup.quad.transition_nodes * 2,
            panel_nodes: setup.quad.panel_nodes + 2,
            ..setup.quad.clone()
        },
        ..setup.clone()
    };
    let (n2, f2, b2, _) = residual_once(&fine, traj, x, t, time_nodes + 2, sample.as_ref())?;
    let lhs = traj.velocity(t, x) - traj.velocity(0.0, x);
    let value = lhs - (near - far - bnd);
    let refine = ((near - n2) - (far - f2) - (bnd - b2)).norm();
    Ok(Residual { value, near, far, boundary: bnd, budget: tail + refine + setup.quad.target_tol })
}

/// Near-field node: source point and premultiplied kernel `w a_eps G`.
#[derive(Clone, Copy, Debug)]
pub struct NearNode {
    pub y: Vec2,
    pub k: Vec2,
}

/// Far-field node: source point and premultiplied symmetric weights.
#[derive(Clone, Copy, Debug)]
pub struct FarNode {
    pub y: Vec2,
    pub w: SymWeight,
}

#[derive(Clone, Debug, Default)]
pub struct TargetPlan {
    pub near: Vec<NearNode>,
    pub far: Vec<FarNode>,
    pub boundary: Vec<(usize, Vec2)>,
}

enum PlanStore {
    /// Translation-invariant stencils (full plane), offsets from the target.
    Shared { near: Vec<NearNode>, far: Vec<FarNode> },
    PerTarget(Vec<TargetPlan>),
    OnTheFly,
}

/// Reconstruction targets and their precomputed quadrature plans on a fixed
/// window.
pub struct Reconstructor {
    pub setup: SerfatiSetup,
    pub window: Grid,
    pub window_quad: QuadratureSpec,
    pub targets: Vec<Vec2>,
    /// `u0 : u0` part of the far field per target, per unit time.
    pub f0: Vec<Vec2>,
    /// Tail bound per unit time per target.
    pub tail_rate: Vec<f64>,
    pub u0_at: Vec<Vec2>,
    pub boundary: Option<BoundarySample>,
    plans: PlanStore,
}

const PLAN_MEMORY_CAP: usize = 1_500_000_000;

impl Reconstructor {
    /// `targets` must lie in the closure of the domain. `window_quad` sets the
    /// rule for the in-window correction `u(x)u - u0(x)u0`.
    pub fn new(
        setup: SerfatiSetup,
        window: Grid,
        window_quad: QuadratureSpec,
        targets: Vec<Vec2>,
        boundary: Option<BoundarySample>,
        u0: &VectorFn,
    ) -> Result<Self, SerfatiError> {
        setup.validate()?;
        window_quad.validate()?;
        if let Some(x) = targets.iter().find(|x| !setup.domain.contains_closure(**x, 1e-9)) {
            return Err(KernelError::OutsideDomain(*x).into());
        }
        let diam = (window.upper() - window.origin).norm();
        let shared = matches!(setup.domain, Domain::FullPlane);
        let f0_setup = setup.clone();
        let rt = setup.truncation();
        let f0_panels = f0_setup.far_panels_to(rt);
        // sup |u0| from a coarse probe of the rule around the window centre
        let centre = window.origin + (window.upper() - window.origin) * 0.5;
        let mut u_sup = 0.0f64;
        for (y, _) in polar_nodes(&setup.domain, centre, &f0_panels, 16) {
            u_sup = u_sup.max(u0(y).norm());
        }
        for x in &targets {
            u_sup = u_sup.max(u0(*x).norm());
        }
        let f0_and_tail: Vec<(Vec2, f64)> = targets
            .par_iter()
            .map(|&x| {
                let mut acc = Vec2::ZERO;
                for (y, w) in polar_nodes(&setup.domain, x, &f0_panels, setup.quad.far_angles()) {
                    let jet = domain_jet(&setup.domain, x, y, setup.kernel);
                    let ww = weights_from_jet(&jet, &setup.cutoff, setup.eps, x - y);
                    acc += contract(&sym_weight(&ww, w), Sym2::outer(u0(y)));
                }
                (acc, setup.tail_rate(x, u_sup))
            })
            .collect();
        let u0_at = targets.iter().map(|&x| u0(x)).collect();
        let mut rec = Reconstructor {
            setup,
            window,
            window_quad,
            targets,
            f0: f0_and_tail.iter().map(|p| p.0).collect(),
            tail_rate: f0_and_tail.iter().map(|p| p.1).collect(),
            u0_at,
            boundary,
            plans: PlanStore::OnTheFly,
        };
        rec.plans = if shared {
            let p = rec.build_plan(Vec2::ZERO, diam, false);
            PlanStore::Shared { near: p.near, far: p.far }
        } else {
            let probe = rec.build_plan(rec.targets[0], diam, true);
            let per = probe.near.len() * std::mem::size_of::<NearNode>()
                + probe.far.len() * std::mem::size_of::<FarNode>();
            if per * rec.targets.len() <= PLAN_MEMORY_CAP {
                let plans = rec.targets.par_iter().map(|&x| rec.build_plan(x, diam, true)).collect();
                PlanStore::PerTarget(plans)
            } else {
                PlanStore::OnTheFly
            }
        };
        Ok(rec)
    }

    fn build_plan(&self, x: Vec2, r_max: f64, clip_window: bool) -> TargetPlan {
        let s = &self.setup;
        let near = polar_nodes(&s.domain, x, &s.near_panels(), s.quad.angular_nodes)
            .into_iter()
            .filter(|(y, _)| !clip_window || self.window.contains(*y))
            .map(|(y, w)| {
                let a = s.cutoff.a_eps(x - y, s.eps);
                NearNode { y: y - if clip_window { Vec2::ZERO } else { x }, k: kernel_value(&s.domain, x, y, s.kernel) * (w * a) }
            })
            .collect();
        let panels = far_panels(
            s.cutoff.c_inner * s.eps,
            s.cutoff.c_outer * s.eps,
            r_max.max(2.0 * s.cutoff.c_outer * s.eps),
            &self.window_quad,
        );
        let far = polar_nodes(&s.domain, x, &panels, self.window_quad.far_angles())
            .into_iter()
            .filter(|(y, _)| !clip_window || self.window.contains(*y))
            .map(|(y, w)| {
                let jet = domain_jet(&s.domain, x, y, s.kernel);
                let ww = weights_from_jet(&jet, &s.cutoff, s.eps, x - y);
                FarNode { y: y - if clip_window { Vec2::ZERO } else { x }, w: sym_weight(&ww, w) }
            })
            .collect();
        let boundary = self
            .boundary
            .as_ref()
            .map(|b| boundary_coefficients(s, x, b))
            .unwrap_or_default();
        TargetPlan { near, far, boundary }
    }

    fn with_plan<R>(&self, i: usize, f: impl FnOnce(&[NearNode], &[FarNode], &[(usize, Vec2)], Vec2) -> R) -> R {
        let x = self.targets[i];
        match &self.plans {
            PlanStore::Shared { near, far } => {
                let bnd = self
                    .boundary
                    .as_ref()
                    .map(|b| boundary_coefficients(&self.setup, x, b))
                    .unwrap_or_default();
                f(near, far, &bnd, x)
            }
            PlanStore::PerTarget(p) => f(&p[i].near, &p[i].far, &p[i].boundary, Vec2::ZERO),
            PlanStore::OnTheFly => {
                let diam = (self.window.upper() - self.window.origin).norm();
                let p = self.build_plan(x, diam, true);
                f(&p.near, &p.far, &p.boundary, Vec2::ZERO)
            }
        }
    }

    /// Index of the target at `x`.
    pub fn probe_index(&self, x: Vec2) -> Result<usize, SerfatiError> {
        self.targets
            .iter()
            .position(|t| (*t - x).norm() < 1e-12)
            .ok_or(SerfatiError::NotAProbe(x))
    }

    /// Per-target near, far and boundary accumulations at time `t`.
    ///
    /// `q` is `\int_0^t (u(x)u - u0(x)u0)` on the window nodes and `bq` is
    /// `\int_0^t |u|^2` at the boundary sample nodes.
    pub fn evaluate(
        &self,
        t: f64,
        omega: &VorticityField,
        q: &[Sym2],
        bq: &[f64],
    ) -> Vec<ProbeTerms> {
        let window = &self.window;
        (0..self.targets.len())
            .into_par_iter()
            .map(|i| {
                self.with_plan(i, |near, far, bnd, shift| {
                    let mut n = Vec2::ZERO;
                    for nd in near {
                        let y = nd.y + shift;
                        let d = omega.diff(y);
                        if d != 0.0 {
                            n += nd.k * d;
                        }
                    }
                    let mut fd = Vec2::ZERO;
                    for nd in far {
                        let y = nd.y + shift;
                        if let Some(p) = window.interp(q, y) {
                            fd += contract(&nd.w, p);
                        }
                    }
                    let mut b = Vec2::ZERO;
                    for &(k, c) in bnd {
                        b += c * bq[k];
                    }
                    let far_accum = self.f0[i] * t + fd;
                    ProbeTerms {
                        near: n,
                        far_accum,
                        boundary_accum: b,
                        tail: self.tail_rate[i] * t,
                        u: self.u0_at[i] + n - far_accum - b,
                    }
                })
            })
            .collect()
    }
}

/// Accumulated identity terms at one probe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeTerms {
    pub near: Vec2,
    pub far_accum: Vec2,
    pub boundary_accum: Vec2,
    pub tail: f64,
    pub u: Vec2,
}
