//! Osgood moduli, the Gamma envelope, the continuous-dependence bound and
//! paired-run comparison.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::quadrature::gauss_on;
use crate::solver::RunHistory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("C s0 t = {0} is outside the small-closeness branch (< 1/e)")]
    Branch(f64),
    #[error("invalid bound parameters: {0}")]
    Params(String),
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("numeric inversion did not converge")]
    NoConvergence,
}

/// `mu(r) = -C r log r` on `(0, 1/e]`, `C r` beyond.
pub fn mu(r: f64, c: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= 1.0 / E {
        -c * r * r.ln()
    } else {
        c * r
    }
}

/// `nu(r) = C[(1 + t) mu(r) + r]` with a unit-constant `mu`.
pub fn nu(r: f64, t: f64, c: f64) -> f64 {
    c * ((1.0 + t) * mu(r, 1.0) + r)
}

/// `\int_a^b f(s) ds` in the variable `log s`, composite Gauss per unit of
/// `log s`; accurate for Osgood-type integrands.
fn log_integral(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (la, lb) = (lo.ln(), hi.ln());
    let panels = ((lb - la).ceil() as usize).clamp(1, 4000);
    let step = (lb - la) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let l0 = la + step * p as f64;
        for (v, w) in gauss_on(l0, l0 + step, 20) {
            let x = v.exp();
            s += w * x * f(x);
        }
    }
    sign * s
}

/// `\int_a^b ds / mu(s)`.
pub fn osgood_integral(a: f64, b: f64, c: f64) -> f64 {
    log_integral(a, b, &|s| 1.0 / mu(s, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The sampled data violate the hypothesis.
    Inconclusive,
}

/// Check the Osgood conclusion on samples `(t_k, L_k, gamma_k)` satisfying
/// `L(t) <= a + \int_0^t gamma mu(L)`. With `a = 0` the conclusion is
/// `L = 0` (to `tol`); otherwise `\int_a^{L(t)} ds/mu <= \int_0^t gamma`.
pub fn osgood_check(
    times: &[f64],
    l: &[f64],
    gamma: &[f64],
    mu_fn: &dyn Fn(f64) -> f64,
    a: f64,
    tol: f64,
) -> Verdict {
    let n = times.len();
    if n == 0 || l.len() != n || gamma.len() != n {
        return Verdict::Inconclusive;
    }
    // hypothesis, trapezoid in time
    let mut rhs = a;
    let mut gint = vec![0.0; n];
    for k in 0..n {
        if k > 0 {
            let dt = times[k] - times[k - 1];
            rhs += 0.5 * dt * (gamma[k] * mu_fn(l[k]) + gamma[k - 1] * mu_fn(l[k - 1]));
            gint[k] = gint[k - 1] + 0.5 * dt * (gamma[k] + gamma[k - 1]);
        }
        if l[k] > rhs * (1.0 + 1e-9) + tol {
            return Verdict::Inconclusive;
        }
    }
    if a == 0.0 {
        return if l.iter().all(|v| v.abs() <= tol) { Verdict::Pass } else { Verdict::Fail };
    }
    for k in 0..n {
        if l[k] <= a {
            continue;
        }
        let lhs = log_integral(a, l[k], &|s| 1.0 / mu_fn(s));
        if lhs > gint[k] * (1.0 + 1e-6) + tol {
            return Verdict::Fail;
        }
    }
    Verdict::Pass
}

/// Equality case with `mu = -r log r`, `gamma = 1`: `L(t) = a^{exp(-t)}`.
pub fn osgood_equality_solution(a: f64, t: f64) -> f64 {
    (a.ln() * (-t).exp()).exp()
}

/// Integrate `L' = -L log L` with RK4 from `L(0) = a`; returns `(L(t),
/// \int_a^{L(t)} ds/mu, t)`, the two sides of the Osgood conclusion.
pub fn osgood_equality_check(a: f64, t: f64, steps: usize) -> (f64, f64, f64) {
    let f = |l: f64| mu(l, 1.0);
    let h = t / steps as f64;
    let mut l = a;
    for _ in 0..steps {
        let k1 = f(l);
        let k2 = f(l + 0.5 * h * k1);
        let k3 = f(l + 0.5 * h * k2);
        let k4 = f(l + h * k3);
        l += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    (l, osgood_integral(a, l, 1.0), t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub c: f64,
    pub t_horizon: f64,
    pub s0: f64,
    /// Integrability exponent; `None` is the sup norm.
    pub p: Option<f64>,
}

impl BoundParams {
    pub fn new(c: f64, t_horizon: f64, s0: f64) -> Result<Self, BoundsError> {
        let b = BoundParams { c, t_horizon, s0, p: None };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.c > 0.0) || !(self.s0 >= 0.0) || !(self.t_horizon >= 0.0) {
            return Err(BoundsError::Params(format!("need C > 0, s0 >= 0, T >= 0; got {self:?}")));
        }
        if let Some(p) = self.p {
            if !(p > 2.0) {
                return Err(BoundsError::Params(format!("p must exceed 2, got {p}")));
            }
        }
        Ok(())
    }

    /// Whether `C s0 t` lies in the `-r log r` branch.
    pub fn small_branch(&self, t: f64) -> bool {
        self.c * self.s0 * t < 1.0 / E
    }
}

/// `Gamma(t) = e^{C_t} (C s0 t)^{exp(-Ct(1+t))}`,
/// `C_t = (1 - exp(-Ct(1+t))) / (1 + t)`.
pub fn gamma_closed_form(p: &BoundParams, t: f64) -> Result<f64, BoundsError> {
    p.validate()?;
    let a = p.c * p.s0 * t;
    if !p.small_branch(t) {
        return Err(BoundsError::Branch(a));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let ex = (-p.c * t * (1.0 + t)).exp();
    let ct = (1.0 - ex) / (1.0 + t);
    Ok(ct.exp() * a.powf(ex))
}

/// Solve `\int_{C s0 t}^{Gamma} ds / nu(s) = t` for `Gamma` by Newton steps
/// on the log-variable quadrature. Like the closed form, `nu` keeps the
/// logarithmic branch of `mu` up to `Gamma < 1`.
pub fn gamma_numeric(p: &BoundParams, t: f64) -> Result<f64, BoundsError> {
    p.validate()?;
    let a = p.c * p.s0 * t;
    if a == 0.0 {
        return Ok(0.0);
    }
    let nu_log = |s: f64| p.c * ((1.0 + t) * (-s * s.ln()) + s);
    let f = |g: f64| log_integral(a, g, &|s| 1.0 / nu_log(s)) - t;
    let mut g = a * 2.0;
    for _ in 0..200 {
        let r = f(g);
        let step = r * nu_log(g);
        // damped in log space to stay positive
        let ng = (g.ln() - (step / g).clamp(-2.0, 2.0)).exp();
        if ((ng - g) / g).abs() < 1e-12 {
            return if ng < 1.0 { Ok(ng) } else { Err(BoundsError::Branch(a)) };
        }
        g = ng;
    }
    Err(BoundsError::NoConvergence)
}

/// `C e^{Ct} s0 - C(1+t) e^{Ct} (C s0 t)^{exp(-Ct(1+t))} log(C s0 t)`.
pub fn cont_dep_bound(p: &BoundParams, t: f64) -> Result<f64, BoundsError> {
    p.validate()?;
    let a = p.c * p.s0 * t;
    if !p.small_branch(t) {
        return Err(BoundsError::Branch(a));
    }
    let ect = (p.c * t).exp();
    let first = p.c * ect * p.s0;
    if a == 0.0 {
        return Ok(first);
    }
    let ex = (-p.c * t * (1.0 + t)).exp();
    Ok(first - p.c * (1.0 + t) * ect * a.powf(ex) * a.ln())
}

/// Smallest `C` (to relative precision 1e-6) with `cont_dep_bound >= measured`
/// at every sample.
pub fn fit_cont_dep_constant(s0: f64, samples: &[(f64, f64)]) -> Result<f64, BoundsError> {
    let ok = |c: f64| {
        samples.iter().all(|&(t, m)| {
            let p = BoundParams { c, t_horizon: t, s0, p: None };
            matches!(cont_dep_bound(&p, t), Ok(b) if b >= m)
        })
    };
    let tmax = samples.iter().fold(0.0f64, |m, s| m.max(s.0));
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi * s0 * tmax >= 1.0 / E {
            return Err(BoundsError::Branch(hi * s0 * tmax));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// `||X1(t) - X2(t)||_inf` over forward markers.
    pub h: Vec<f64>,
    /// `P(t) = ||u2(t, X2) - u1(t, X1)||_inf`.
    pub p: Vec<f64>,
    /// Trapezoid integral of `P`.
    pub m: Vec<f64>,
    /// `||u1(t) - u2(t)||_inf` over grid nodes.
    pub u_diff: Vec<f64>,
    pub bound: Vec<Option<f64>>,
    pub h_within_m: bool,
    pub within_bound: bool,
}

pub fn compare_runs(a: &RunHistory, b: &RunHistory, params: &BoundParams, tol: f64) -> Result<ComparisonReport, BoundsError> {
    params.validate()?;
    let n = a.times.len();
    if n == 0 || b.times.len() != n {
        return Err(BoundsError::Mismatch(format!("{} vs {} recorded times", n, b.times.len())));
    }
    if a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(BoundsError::Mismatch("time levels differ".into()));
    }
    if a.velocity[0].len() != b.velocity[0].len() || a.markers[0].len() != b.markers[0].len() {
        return Err(BoundsError::Mismatch("grids or marker sets differ".into()));
    }
    let sup = |x: &[Vec2], y: &[Vec2]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((*p - *q).norm()));
    let mut rep = ComparisonReport {
        times: a.times.clone(),
        h: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        m: Vec::with_capacity(n),
        u_diff: Vec::with_capacity(n),
        bound: Vec::with_capacity(n),
        h_within_m: true,
        within_bound: true,
    };
    let mut m = 0.0;
    for k in 0..n {
        let pk = sup(&a.marker_u[k], &b.marker_u[k]);
        if k > 0 {
            m += 0.5 * (a.times[k] - a.times[k - 1]) * (pk + rep.p[k - 1]);
        }
        let hk = sup(&a.markers[k], &b.markers[k]);
        let ud = sup(&a.velocity[k], &b.velocity[k]);
        let t = a.times[k];
        let bound = if t > 0.0 { cont_dep_bound(params, t).ok() } else { None };
        rep.h_within_m &= hk <= m + tol;
        if let Some(bd) = bound {
            rep.within_bound &= ud <= bd;
        }
        rep.p.push(pk);
        rep.m.push(m);
        rep.h.push(hk);
        rep.u_diff.push(ud);
        rep.bound.push(bound);
    }
    Ok(rep)
}
