//! Numerical certification of the kernel estimates: L1 bounds of the near
//! and far kernels, L^p rearrangement bounds, the log-difference bound under
//! measure-preserving maps, and pointwise lemmas.
//!
//! Bounds with unspecified constants are certified as boundedness of the
//! ratio `value / shape` over a declared sweep, compared with a frozen
//! baseline.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{image_unchecked, ConformalMap, Domain, DomainKind, GeometryError, JoukowskiMap, Vec2};
use crate::kernels::{farfield_weights, j_kernel, k_free, kernel_value, kernel_value_offset, Cutoff, KernelChoice};
use crate::quadrature::{
    adaptive_cubature, lp_norm_ball, singular_polar_integral, truncated_plane_integral, QuadratureError,
    QuadratureSpec,
};
use crate::solver::FittedConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("empty sweep")]
    EmptySweep,
    #[error("exponent p = {0} outside [1, 2)")]
    Exponent(f64),
    #[error("delta = {0} must lie in (0, 1/e)")]
    Delta(f64),
    #[error("point {0:?} is not in the fluid")]
    Point(Vec2),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("baseline: {0}")]
    Baseline(String),
}

/// Growth shape a measured value is divided by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `eps`
    Eps,
    /// `eps + eps^2`
    EpsPlusEpsSq,
    /// `1 / eps`
    InvEps,
    One,
    /// `R^{2-p} / (2-p)`
    Rearrangement,
    /// `-delta log delta`
    DeltaLog,
}

impl Shape {
    fn eval(self, s: f64, p: f64) -> f64 {
        match self {
            Shape::Eps => s,
            Shape::EpsPlusEpsSq => s + s * s,
            Shape::InvEps => 1.0 / s,
            Shape::One => 1.0,
            Shape::Rearrangement => s.powf(2.0 - p) / (2.0 - p),
            Shape::DeltaLog => -s * s.ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateVerdict {
    Bounded,
    Violated,
    /// No baseline constant for this report.
    Unfitted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    /// Sweep parameter (epsilon, R, delta, ...).
    pub param: f64,
    /// Secondary parameter (the exponent for rearrangement sweeps).
    pub aux: f64,
    pub x: Vec2,
    pub value: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub shape: Shape,
    pub rows: Vec<EstimateRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub fitted_constant: Option<f64>,
    pub verdict: EstimateVerdict,
}

impl EstimateReport {
    fn new(name: String, shape: Shape, rows: Vec<EstimateRow>) -> Self {
        let max_ratio = rows.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.ratio));
        let min_ratio = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.ratio));
        let fitted = baseline().ok().and_then(|b| b.estimates.get(&name).map(|e| e.fitted));
        let verdict = match fitted {
            Some(c) if max_ratio.is_finite() && max_ratio <= c => EstimateVerdict::Bounded,
            Some(_) => EstimateVerdict::Violated,
            None => EstimateVerdict::Unfitted,
        };
        EstimateReport { name, shape, rows, max_ratio, min_ratio, fitted_constant: fitted, verdict }
    }

    /// `max_ratio / min_ratio`.
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }

    /// CSV sweep table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,param,aux,x1,x2,value,ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                self.name, r.param, r.aux, r.x.x1, r.x.x2, r.value, r.ratio
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub fitted: f64,
    pub measured: f64,
}

/// Versioned frozen constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub version: u32,
    pub estimates: BTreeMap<String, BaselineEntry>,
    pub solver: FittedConstants,
}

pub const BASELINE_JSON: &str = include_str!("../baselines/fitted_constants.json");

pub fn baseline() -> Result<Baseline, EstimateError> {
    serde_json::from_str(BASELINE_JSON).map_err(|e| EstimateError::Baseline(e.to_string()))
}

/// Relative regression of `measured` against the baseline's recorded value.
pub fn regression(name: &str, measured: f64) -> Result<f64, EstimateError> {
    let b = baseline()?;
    let e = b.estimates.get(name).ok_or_else(|| EstimateError::Baseline(format!("no entry '{name}'")))?;
    Ok((measured - e.measured).abs() / e.measured.abs())
}

fn tag(domain: &Domain, choice: KernelChoice) -> String {
    let d = match domain.kind() {
        DomainKind::FullPlane => "plane",
        DomainKind::ExteriorUnitDisk => "disk",
        DomainKind::ExteriorObstacle => "obstacle",
    };
    let k = match (domain.kind(), choice) {
        (DomainKind::FullPlane, _) => "k",
        (_, KernelChoice::Domain) => "k_domain",
        (_, KernelChoice::Hydrodynamic) => "j",
    };
    format!("{d}.{k}")
}

fn check_points(domain: &Domain, xs: &[Vec2]) -> Result<(), EstimateError> {
    match xs.iter().find(|x| !domain.contains(**x)) {
        Some(x) => Err(EstimateError::Point(*x)),
        None => Ok(()),
    }
}

/// `|| a_eps(x - .) G(x, .) ||_{L1}` over the sweep, divided by `eps`
/// (or `eps + eps^2` for the domain kernel outside an obstacle).
pub fn certify_near_l1(
    domain: &Domain,
    choice: KernelChoice,
    eps_list: &[f64],
    x_list: &[Vec2],
    spec: &QuadratureSpec,
) -> Result<EstimateReport, EstimateError> {
    if eps_list.is_empty() || x_list.is_empty() {
        return Err(EstimateError::EmptySweep);
    }
    check_points(domain, x_list)?;
    let cutoff = Cutoff::default();
    let shape = if domain.has_boundary() && choice == KernelChoice::Domain { Shape::EpsPlusEpsSq } else { Shape::Eps };
    let mut rows = Vec::new();
    for &eps in eps_list {
        for &x in x_list {
            let v = singular_polar_integral(domain, x, cutoff.c_outer * eps, spec, |y| {
                cutoff.a_eps(x - y, eps) * kernel_value(domain, x, y, choice).norm()
            })?;
            rows.push(EstimateRow { param: eps, aux: 0.0, x, value: v, ratio: v / shape.eval(eps, 0.0) });
        }
    }
    Ok(EstimateReport::new(format!("near_l1.{}", tag(domain, choice)), shape, rows))
}

/// `|| grad_y grad_y^perp ((1 - a_eps) G) ||_{L1}` (Frobenius norm over both
/// components), times `eps`; the domain kernel outside an obstacle is only
/// expected to stay bounded.
pub fn certify_far_l1(
    domain: &Domain,
    choice: KernelChoice,
    eps_list: &[f64],
    x_list: &[Vec2],
    spec: &QuadratureSpec,
) -> Result<EstimateReport, EstimateError> {
    if eps_list.is_empty() || x_list.is_empty() {
        return Err(EstimateError::EmptySweep);
    }
    check_points(domain, x_list)?;
    let cutoff = Cutoff::default();
    let shape = if domain.has_boundary() && choice == KernelChoice::Domain { Shape::One } else { Shape::InvEps };
    let mut rows = Vec::new();
    for &eps in eps_list {
        for &x in x_list {
            let (v, _tail) = truncated_plane_integral(domain, x, cutoff.c_inner * eps, eps, spec, |y| {
                let w = farfield_weights(domain, &cutoff, eps, x, y, choice);
                w.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt()
            })?;
            rows.push(EstimateRow { param: eps, aux: 0.0, x, value: v, ratio: v / shape.eval(eps, 0.0) });
        }
    }
    Ok(EstimateReport::new(format!("far_l1.{}", tag(domain, choice)), shape, rows))
}

/// `|| G(x, .) ||^p_{L^p(B_R(x))}` divided by `R^{2-p} / (2-p)`.
pub fn certify_rearrangement(
    domain: &Domain,
    choice: KernelChoice,
    p_list: &[f64],
    r_list: &[f64],
    x: Vec2,
    spec: &QuadratureSpec,
) -> Result<EstimateReport, EstimateError> {
    if p_list.is_empty() || r_list.is_empty() {
        return Err(EstimateError::EmptySweep);
    }
    if let Some(p) = p_list.iter().find(|p| !(**p >= 1.0 && **p < 2.0)) {
        return Err(EstimateError::Exponent(*p));
    }
    check_points(domain, &[x])?;
    let mut rows = Vec::new();
    for &p in p_list {
        for &r in r_list {
            let n = lp_norm_ball(domain, x, r, p, spec, |o| kernel_value_offset(domain, x, o, choice).norm())?;
            let v = n.powf(p);
            rows.push(EstimateRow { param: r, aux: p, x, value: v, ratio: v / Shape::Rearrangement.eval(r, p) });
        }
    }
    Ok(EstimateReport::new(format!("rearrangement.{}", tag(domain, choice)), Shape::Rearrangement, rows))
}

/// Measure-preserving map pairs for the log-difference bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HlogPair {
    /// Identity against rotation by `delta` (disk exterior).
    Rotation,
    /// Identity against the time-`delta` map of the radial vortex (disk
    /// exterior), rotation by `delta / |z|`.
    RadialVortex,
    /// Identity against translation by `delta e1` (full plane).
    Translation,
}

/// `|| K(x, X1(z)) - K(x, X2(z)) ||_{L1(U)}` over a set `U` of measure `2 pi`
/// containing `x`, divided by `-delta log delta`.
pub fn certify_hlog(pair: HlogPair, delta_list: &[f64], tol: f64) -> Result<EstimateReport, EstimateError> {
    if delta_list.is_empty() {
        return Err(EstimateError::EmptySweep);
    }
    if let Some(d) = delta_list.iter().find(|d| !(**d > 0.0 && **d < (-1.0f64).exp())) {
        return Err(EstimateError::Delta(*d));
    }
    let rows: Vec<EstimateRow> = delta_list
        .par_iter()
        .map(|&d| {
            let (x, v) = hlog_value(pair, d, tol);
            EstimateRow { param: d, aux: 0.0, x, value: v, ratio: v / Shape::DeltaLog.eval(d, 0.0) }
        })
        .collect();
    let name = match pair {
        HlogPair::Rotation => "hlog.rotation",
        HlogPair::RadialVortex => "hlog.radial_vortex",
        HlogPair::Translation => "hlog.translation",
    };
    Ok(EstimateReport::new(name.into(), Shape::DeltaLog, rows))
}

/// The L1 difference for one `delta`; returns the evaluation point too.
pub fn hlog_value(pair: HlogPair, delta: f64, tol: f64) -> (Vec2, f64) {
    let rot = |z: Vec2, a: f64| {
        let (s, c) = a.sin_cos();
        Vec2::new(c * z.x1 - s * z.x2, s * z.x1 + c * z.x2)
    };
    let kd = |x: Vec2, y: Vec2| kernel_value(&Domain::ExteriorUnitDisk, x, y, KernelChoice::Domain);
    match pair {
        HlogPair::Rotation | HlogPair::RadialVortex => {
            // U = {1 < |z| < sqrt 3}, area 2 pi, in polar coordinates
            let x = Vec2::new(1.5, 0.0);
            let f = |r: f64, th: f64| {
                let z = Vec2::polar(r, th);
                let a = if pair == HlogPair::Rotation { delta } else { delta / r };
                let v = (kd(x, z) - kd(x, rot(z, a))).norm() * r;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            (x, adaptive_cubature((1.0, -PI), (3f64.sqrt(), PI), tol, 40, &f))
        }
        HlogPair::Translation => {
            // U = ball of radius sqrt 2 about x; |K(a) - K(b)| = |a-b| / (2 pi |a||b|)
            let x = Vec2::ZERO;
            let rr = 2f64.sqrt();
            let f = |r: f64, th: f64| {
                let z = Vec2::polar(r, th);
                let a = x - z;
                let b = a - Vec2::new(delta, 0.0);
                let v = delta / (2.0 * PI * a.norm() * b.norm()) * r;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            (x, adaptive_cubature((0.0, -PI), (rr, PI), tol, 40, &f))
        }
    }
}

/// Outcome of one pointwise lemma sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseCheck {
    pub name: String,
    /// Worst observed value of the bounded quantity.
    pub worst: f64,
    /// The lemma's bound, when it is explicit.
    pub bound: Option<f64>,
    pub samples: usize,
    pub holds: bool,
}

/// Extremal pair for `inf |x||y|` over `|x - y| = R`, `|x|, |y| >= 1`.
pub fn lemma56_extremal(r: f64) -> (Vec2, Vec2, f64) {
    let x = Vec2::new(-(r - 1.0), 0.0);
    let y = Vec2::new(1.0, 0.0);
    (x, y, x.norm() * y.norm())
}

fn sample_exterior(rng: &mut StdRng, rmax: f64) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax));
        if p.norm() > 1.0 && p.norm() < rmax {
            return p;
        }
    }
}

/// Randomized and adversarial sweeps of the pointwise lemmas on the disk
/// exterior (and a Joukowski obstacle for the map bound).
pub fn certify_pointwise(samples: usize, seed: u64) -> Vec<PointwiseCheck> {
    let mut rng = StdRng::seed_from_u64(seed);
    let r = 3.0;
    let mut out = Vec::new();

    // |x - y| / |x - y*| <= 2(1 + R) for |x - y| <= R
    let mut worst = 0.0f64;
    let mut worst2 = 0.0f64;
    let mut n2 = 0;
    for _ in 0..samples {
        let x = sample_exterior(&mut rng, 1.0 + 2.0 * r);
        let y = loop {
            let d = Vec2::polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
            if (x + d).norm() >= 1.0 {
                break x + d;
            }
        };
        let ys = image_unchecked(y);
        worst = worst.max((x - y).norm() / (x - ys).norm());
        // 1 / |x - y*| <= 2 when |x - y| >= 1
        let y2 = sample_exterior(&mut rng, 1.0 + 2.0 * r);
        if (x - y2).norm() >= 1.0 {
            worst2 = worst2.max(1.0 / (x - image_unchecked(y2)).norm());
            n2 += 1;
        }
    }
    let b1 = 2.0 * (1.0 + r);
    out.push(PointwiseCheck { name: "lemma55.ratio".into(), worst, bound: Some(b1), samples, holds: worst <= b1 });
    out.push(PointwiseCheck { name: "lemma55.image".into(), worst: worst2, bound: Some(2.0), samples: n2, holds: worst2 <= 2.0 });

    // inf |x||y| over |x - y| = R
    let (_, _, ext) = lemma56_extremal(r);
    let mut inf = ext;
    for _ in 0..samples {
        let x = sample_exterior(&mut rng, 1.0 + r);
        let y = x + Vec2::polar(r, rng.gen_range(0.0..2.0 * PI));
        if y.norm() >= 1.0 {
            inf = inf.min(x.norm() * y.norm());
        }
    }
    out.push(PointwiseCheck {
        name: "lemma56.inf".into(),
        worst: inf,
        bound: Some(r - 1.0),
        samples,
        holds: inf >= r - 1.0 - 1e-12,
    });

    // |J(x, y)| |x - y| bounded
    let mut c = 0.0f64;
    for _ in 0..samples {
        let x = sample_exterior(&mut rng, 20.0);
        let y = sample_exterior(&mut rng, 20.0);
        if let Ok(j) = j_kernel(&Domain::ExteriorUnitDisk, x, y) {
            c = c.max(j.norm() * (x - y).norm());
        }
    }
    out.push(PointwiseCheck { name: "lemma57.j".into(), worst: c, bound: None, samples, holds: c.is_finite() });

    // |D^2 T(y)| |y|^3 bounded for a Joukowski obstacle
    let map = JoukowskiMap::new(1.0, 0.3).expect("valid map");
    let dom = suite_obstacle();
    let mut c1 = 0.0f64;
    let mut m = 0;
    for k in 0..samples {
        let rad = 10f64.powf(rng.gen_range(0.3..3.0));
        let y = Vec2::polar(rad, 2.0 * PI * k as f64 / samples as f64);
        if !dom.contains(y) {
            continue;
        }
        let d2 = map.second_derivative(y);
        let f: f64 = d2.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
        c1 = c1.max(f * rad.powi(3));
        m += 1;
    }
    out.push(PointwiseCheck { name: "lemma58.d2t".into(), worst: c1, bound: None, samples: m, holds: c1.is_finite() });

    // free kernel magnitude identity as a sanity anchor
    let kf = k_free(Vec2::new(1.0, 0.0)).map(|v| v.norm()).unwrap_or(f64::NAN);
    out.push(PointwiseCheck {
        name: "free_kernel.unit".into(),
        worst: kf,
        bound: Some(1.0 / (2.0 * PI)),
        samples: 1,
        holds: (kf - 1.0 / (2.0 * PI)).abs() < 1e-15,
    });
    out
}

/// Default quadrature used by the certification sweeps.
pub fn certification_spec() -> QuadratureSpec {
    QuadratureSpec {
        radial_nodes: 64,
        angular_nodes: 64,
        truncation_radius: None,
        far_angular_nodes: Some(128),
        transition_nodes: 16,
        panel_nodes: 8,
        ..QuadratureSpec::default()
    }
}

/// Sweep lists of the standard certification suite.
pub const SUITE_EPS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
pub const SUITE_P: [f64; 6] = [1.0, 1.25, 1.5, 1.75, 1.9, 1.95];
pub const SUITE_R: [f64; 3] = [0.5, 1.0, 2.0];
pub const SUITE_DELTA: [f64; 3] = [1e-4, 1e-3, 1e-2];

/// Obstacle used by the suite: Joukowski ellipse with `c = 1`, `lambda = 0.3`.
pub fn suite_obstacle() -> Domain {
    Domain::ExteriorObstacle(std::sync::Arc::new(JoukowskiMap::new(1.0, 0.3).expect("valid map")))
}

/// Every L1, rearrangement and log-difference report of the standard suite.
pub fn standard_suite(spec: &QuadratureSpec) -> Result<Vec<EstimateReport>, EstimateError> {
    let pts = |a: f64| vec![Vec2::new(a, 0.0), Vec2::new(3.0, 0.0), Vec2::new(10.0, 0.0)];
    let cases = [
        (Domain::FullPlane, KernelChoice::Domain, vec![Vec2::ZERO, Vec2::new(3.0, -1.0), Vec2::new(-7.0, 2.0)]),
        (Domain::ExteriorUnitDisk, KernelChoice::Domain, pts(1.5)),
        (Domain::ExteriorUnitDisk, KernelChoice::Hydrodynamic, pts(1.5)),
        (suite_obstacle(), KernelChoice::Domain, pts(1.6)),
        (suite_obstacle(), KernelChoice::Hydrodynamic, pts(1.6)),
    ];
    let mut out = Vec::new();
    for (d, c, xs) in &cases {
        out.push(certify_near_l1(d, *c, &SUITE_EPS, xs, spec)?);
        out.push(certify_far_l1(d, *c, &SUITE_EPS, xs, spec)?);
        out.push(certify_rearrangement(d, *c, &SUITE_P, &SUITE_R, xs[0], spec)?);
    }
    for pair in [HlogPair::Rotation, HlogPair::RadialVortex, HlogPair::Translation] {
        out.push(certify_hlog(pair, &SUITE_DELTA, 1e-9)?);
    }
    Ok(out)
}

/// Baseline recording each report's max ratio, with `margin` headroom on
/// the fitted constant.
pub fn fit_baseline(reports: &[EstimateReport], solver: FittedConstants, margin: f64) -> Baseline {
    let estimates = reports
        .iter()
        .map(|r| (r.name.clone(), BaselineEntry { fitted: r.max_ratio * margin, measured: r.max_ratio }))
        .collect();
    Baseline { version: 1, estimates, solver }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_parses() {
        let b = baseline().unwrap();
        assert!(b.version >= 1);
        assert!(b.solver.envelope > 0.0);
    }

    #[test]
    fn identical_maps_give_zero() {
        // delta -> 0 limit: the integrand vanishes identically
        let (_, v) = hlog_value(HlogPair::Translation, 1e-300, 1e-12);
        assert!(v < 1e-290);
    }

    #[test]
    fn extremal_pair_attains_bound() {
        let (x, y, v) = lemma56_extremal(3.0);
        assert!(((x - y).norm() - 3.0).abs() < 1e-15);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
