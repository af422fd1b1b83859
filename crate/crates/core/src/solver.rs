//! Time stepping: advect labels, accumulate the far-field and boundary time
//! integrals, rebuild the velocity from the identity, check guardrails.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{serfati_norm, FieldError, Grid, SerfatiNorm, Sym2, VectorFn, VelocityField, VorticityField};
use crate::geometry::{BoundarySample, GeometryError, Vec2};
use crate::quadrature::QuadratureSpec;
use crate::scenarios::{build, Scenario, ScenarioError, ScenarioParams};
use crate::serfati::{apriori_velocity_bound, near_field_term, ProbeTerms, Reconstructor, SerfatiError, SerfatiSetup};
use crate::transport::{advance_labels, advance_markers, flow_diagnostics, FlowDiagnostics, TimeSlab, TransportStats};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Serfati(#[from] SerfatiError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("guardrail '{kind}' breached at t = {t}: {detail}")]
    Guardrail { kind: GuardrailKind, t: f64, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardrailKind {
    VorticityBound,
    VelocityEnvelope,
    ObstaclePenetration,
    NonFinite,
}

impl std::fmt::Display for GuardrailKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GuardrailKind::VorticityBound => "vorticity_bound",
            GuardrailKind::VelocityEnvelope => "velocity_envelope",
            GuardrailKind::ObstaclePenetration => "obstacle_penetration",
            GuardrailKind::NonFinite => "non_finite",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Abort when more than this fraction of active feet land in the obstacle.
    pub max_projection_fraction: f64,
    /// Inactive nodes within this many cells of an active node copy its
    /// deviation from `u0`.
    pub extension_cells: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { max_projection_fraction: 0.05, extension_cells: 4.0 }
    }
}

/// Constants fitted once on the blob and frozen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FittedConstants {
    /// `C` of the velocity envelope `C e^{Ct}`.
    pub envelope: f64,
    /// `alpha = holder * sup_s ||u(s)||_S` for the Hölder exponent.
    pub holder: f64,
    /// Master constant of the continuous-dependence bound.
    pub cont_dep: f64,
}

impl Default for FittedConstants {
    fn default() -> Self {
        FittedConstants { envelope: 2.0, holder: 1.0, cont_dep: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub params: ScenarioParams,
    /// Grid spacing; the window width must be a multiple of it.
    pub h: f64,
    /// Half-width of the square window; scenario default when absent.
    pub window_half: Option<f64>,
    pub window_center: Option<Vec2>,
    pub dt: f64,
    pub t_final: f64,
    pub epsilon: f64,
    /// Overrides `quadrature.truncation_radius`.
    pub truncation_radius: Option<f64>,
    /// Rule for the cutoff ball and the `u0 (x) u0` far field.
    pub quadrature: QuadratureSpec,
    /// Rule for the in-window far-field correction.
    pub window_quadrature: QuadratureSpec,
    pub corrector_passes: usize,
    pub boundary_nodes: usize,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
    /// Forward markers start on every `marker_stride`-th node.
    pub marker_stride: usize,
    pub record_history: bool,
    pub allow_experimental: bool,
    pub tolerances: Tolerances,
    pub fitted_constants: FittedConstants,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "blob".into(),
            params: ScenarioParams::default(),
            h: 1.0 / 16.0,
            window_half: None,
            window_center: None,
            dt: 1.0 / 128.0,
            t_final: 0.5,
            epsilon: 0.5,
            truncation_radius: None,
            quadrature: QuadratureSpec {
                radial_nodes: 16,
                angular_nodes: 32,
                truncation_radius: Some(200.0),
                far_angular_nodes: Some(64),
                transition_nodes: 12,
                panel_nodes: 6,
                ..QuadratureSpec::default()
            },
            window_quadrature: QuadratureSpec {
                radial_nodes: 16,
                angular_nodes: 32,
                far_angular_nodes: Some(32),
                transition_nodes: 6,
                panel_nodes: 3,
                ..QuadratureSpec::default()
            },
            corrector_passes: 1,
            boundary_nodes: 512,
            snapshot_every: 0,
            marker_stride: 4,
            record_history: true,
            allow_experimental: false,
            tolerances: Tolerances::default(),
            fitted_constants: FittedConstants::default(),
        }
    }
}

impl RunConfig {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let pos = |v: f64, n: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::Config(format!("{n} must be positive, got {v}")))
            }
        };
        pos(self.h, "h")?;
        pos(self.dt, "dt")?;
        pos(self.epsilon, "epsilon")?;
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(SolverError::Config(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        let n = self.t_final / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(SolverError::Config(format!("t_final {} is not a multiple of dt {}", self.t_final, self.dt)));
        }
        if let Some(w) = self.window_half {
            pos(w, "window_half")?;
        }
        if let Some(r) = self.truncation_radius {
            pos(r, "truncation_radius")?;
        }
        if self.marker_stride == 0 {
            return Err(SolverError::Config("marker_stride must be >= 1".into()));
        }
        if self.boundary_nodes < 3 {
            return Err(SolverError::Config("boundary_nodes must be >= 3".into()));
        }
        self.quadrature.validate().map_err(SerfatiError::from)?;
        self.window_quadrature.validate().map_err(SerfatiError::from)?;
        Ok(())
    }

    fn main_quad(&self) -> QuadratureSpec {
        let mut q = self.quadrature.clone();
        if self.truncation_radius.is_some() {
            q.truncation_radius = self.truncation_radius;
        }
        q
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub labels: Vec<Vec2>,
    /// Velocity at every grid node (inactive nodes hold the extension).
    pub velocity: Vec<Vec2>,
    pub prev_velocity: Option<Vec<Vec2>>,
    /// Velocity at the boundary probes.
    pub boundary_u: Vec<Vec2>,
    pub prev_boundary_u: Option<Vec<Vec2>>,
    /// `\int_0^t (u (x) u - u0 (x) u0)` on the grid.
    pub q: Vec<Sym2>,
    /// Integrand of `q` at `t`.
    pub d: Vec<Sym2>,
    /// `\int_0^t |u|^2` at the boundary probes.
    pub bq: Vec<f64>,
    /// Identity terms at every target (node targets first, then probes).
    pub terms: Vec<ProbeTerms>,
    pub transport: TransportStats,
    pub markers: Vec<Vec2>,
    pub marker_u: Vec<Vec2>,
    /// Change of the velocity in the last corrector pass.
    pub identity_residual: f64,
    /// Largest S-norm seen so far.
    pub s_norm_max: f64,
}

/// One row of the conservation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationRow {
    pub step: usize,
    pub t: f64,
    pub sup_omega: f64,
    pub sup_u: f64,
    pub s_norm: SerfatiNorm,
    pub circulation: Option<f64>,
    pub vorticity_mass: f64,
    pub max_normal_velocity: Option<f64>,
    pub diagnostics: FlowDiagnostics,
    /// Largest far-field truncation bound over the targets.
    pub tail_budget: f64,
    pub identity_residual: f64,
    pub foot_projections: usize,
}

/// Per-step record used for paired-run comparisons.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunHistory {
    pub times: Vec<f64>,
    pub velocity: Vec<Vec<Vec2>>,
    pub markers: Vec<Vec<Vec2>>,
    pub marker_u: Vec<Vec<Vec2>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub steps: usize,
    pub t_final: f64,
    pub rows: Vec<ConservationRow>,
    pub max_identity_residual: f64,
    pub max_tail_budget: f64,
    pub runtime_secs: f64,
    pub aborted: Option<String>,
}

/// Grid node record for snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub x1: f64,
    pub x2: f64,
    pub u1: f64,
    pub u2: f64,
    pub omega: f64,
    pub label1: f64,
    pub label2: f64,
}

pub struct Simulation {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub setup: SerfatiSetup,
    pub grid: Grid,
    pub active: Vec<bool>,
    pub boundary: Option<BoundarySample>,
    pub u0_nodes: Vec<Vec2>,
    pub u0_boundary: Vec<Vec2>,
    pub state: SimState,
    pub history: RunHistory,
    extension: Vec<Option<usize>>,
    target_nodes: Vec<usize>,
    rec: Reconstructor,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let scenario = build(&config.scenario, &config.params)?;
        Self::with_scenario(config, scenario)
    }

    /// Start from an explicit scenario (the name in `config` is ignored).
    pub fn with_scenario(config: RunConfig, scenario: Scenario) -> Result<Self, SolverError> {
        config.validate()?;
        if scenario.experimental && !config.allow_experimental {
            return Err(ScenarioError::Experimental(scenario.name.clone()).into());
        }
        let domain = scenario.domain.clone();
        let half = config.window_half.unwrap_or(scenario.window_half);
        let center = config.window_center.unwrap_or(scenario.window_center);
        let cells = 2.0 * half / config.h;
        if (cells - cells.round()).abs() > 1e-6 || cells.round() < 4.0 {
            return Err(SolverError::Config(format!(
                "window width {} is not a multiple (>= 4) of h = {}",
                2.0 * half,
                config.h
            )));
        }
        let n = cells.round() as usize + 1;
        let grid = Grid::square(center, half, n)?;
        let nodes = grid.nodes();
        let active: Vec<bool> = nodes.iter().map(|x| domain.contains_closure(*x, 0.0)).collect();
        if !active.iter().any(|a| *a) {
            return Err(SolverError::Config("window contains no fluid nodes".into()));
        }

        let reach = config.tolerances.extension_cells.max(0.0);
        let r = reach.ceil() as isize;
        let extension: Vec<Option<usize>> = (0..grid.len())
            .map(|k| {
                if active[k] {
                    return None;
                }
                let (i, j) = ((k % grid.nx) as isize, (k / grid.nx) as isize);
                let mut best: Option<(f64, usize)> = None;
                for dj in -r..=r {
                    for di in -r..=r {
                        let (ii, jj) = (i + di, j + dj);
                        if ii < 0 || jj < 0 || ii >= grid.nx as isize || jj >= grid.ny as isize {
                            continue;
                        }
                        let m = grid.index(ii as usize, jj as usize);
                        let d2 = (di * di + dj * dj) as f64;
                        if active[m] && d2 <= reach * reach && best.is_none_or(|b| d2 < b.0) {
                            best = Some((d2, m));
                        }
                    }
                }
                best.map(|b| b.1)
            })
            .collect();

        let u0 = scenario.u0.clone();
        let u0_nodes: Vec<Vec2> = (0..grid.len())
            .map(|k| {
                if active[k] || extension[k].is_some() {
                    let v = u0(nodes[k]);
                    if v.is_finite() {
                        return v;
                    }
                }
                Vec2::ZERO
            })
            .collect();

        let setup = SerfatiSetup::new(domain.clone(), config.epsilon, config.main_quad())?;
        let boundary = if setup.has_boundary_term() || domain.has_boundary() {
            Some(domain.boundary_sample(config.boundary_nodes)?)
        } else {
            None
        };
        let target_nodes: Vec<usize> = (0..grid.len()).filter(|&k| active[k]).collect();
        let mut targets: Vec<Vec2> = target_nodes.iter().map(|&k| nodes[k]).collect();
        let u0_boundary: Vec<Vec2> = match &boundary {
            Some(b) => {
                targets.extend(b.nodes.iter().map(|nd| nd.y));
                b.nodes.iter().map(|nd| u0(nd.y)).collect()
            }
            None => Vec::new(),
        };
        let rec_boundary = if setup.has_boundary_term() { boundary.clone() } else { None };
        let rec = Reconstructor::new(setup.clone(), grid, config.window_quadrature.clone(), targets, rec_boundary, &u0)?;

        let markers: Vec<Vec2> = (0..grid.len())
            .filter(|&k| {
                let (i, j) = (k % grid.nx, k / grid.nx);
                active[k] && i % config.marker_stride == 0 && j % config.marker_stride == 0
            })
            .map(|k| nodes[k])
            .collect();
        let marker_u = markers.iter().map(|&x| u0(x)).collect();
        let nb = u0_boundary.len();
        let mut sim = Simulation {
            state: SimState {
                t: 0.0,
                step: 0,
                labels: nodes,
                velocity: u0_nodes.clone(),
                prev_velocity: None,
                boundary_u: u0_boundary.clone(),
                prev_boundary_u: None,
                q: vec![Sym2::default(); grid.len()],
                d: vec![Sym2::default(); grid.len()],
                bq: vec![0.0; nb],
                terms: Vec::new(),
                transport: TransportStats::default(),
                markers,
                marker_u,
                identity_residual: 0.0,
                s_norm_max: 0.0,
            },
            config,
            scenario,
            setup,
            grid,
            active,
            boundary,
            u0_nodes,
            u0_boundary,
            history: RunHistory::default(),
            extension,
            target_nodes,
            rec,
        };
        sim.state.terms = sim.rec.targets.iter().enumerate().map(|(i, _)| ProbeTerms { u: sim.rec.u0_at[i], ..Default::default() }).collect();
        sim.state.s_norm_max = sim.s_norm()?.total();
        sim.record_history();
        Ok(sim)
    }

    pub fn u0(&self) -> &VectorFn {
        &self.scenario.u0
    }

    pub fn velocity_field(&self) -> VelocityField {
        VelocityField { grid: self.grid, samples: self.state.velocity.clone(), outside: self.scenario.u0.clone() }
    }

    pub fn vorticity_field(&self) -> VorticityField {
        VorticityField {
            grid: self.grid,
            labels: self.state.labels.clone(),
            omega0: self.scenario.omega0.clone(),
            domain: self.scenario.domain.clone(),
        }
    }

    /// Node targets as grid indices.
    pub fn target_nodes(&self) -> &[usize] {
        &self.target_nodes
    }

    pub fn reconstructor(&self) -> &Reconstructor {
        &self.rec
    }

    fn extend(&self, vel: &mut [Vec2]) {
        for k in 0..vel.len() {
            if !self.active[k] {
                vel[k] = match self.extension[k] {
                    Some(m) => self.u0_nodes[k] + (vel[m] - self.u0_nodes[m]),
                    None => Vec2::ZERO,
                };
            }
        }
    }

    fn d_of(&self, vel: &[Vec2]) -> Vec<Sym2> {
        vel.iter().zip(&self.u0_nodes).map(|(u, u0)| Sym2::outer(*u) - Sym2::outer(*u0)).collect()
    }

    fn assemble(&self, terms: &[ProbeTerms]) -> (Vec<Vec2>, Vec<Vec2>) {
        let mut vel = vec![Vec2::ZERO; self.grid.len()];
        let nt = self.target_nodes.len();
        for (i, &k) in self.target_nodes.iter().enumerate() {
            vel[k] = terms[i].u;
        }
        self.extend(&mut vel);
        let b = terms[nt..].iter().map(|p| p.u).collect();
        (vel, b)
    }

    /// Advance one step of size `dt`.
    pub fn step(&mut self) -> Result<(), SolverError> {
        let dt = self.config.dt;
        let st = &self.state;
        let t1 = (st.step + 1) as f64 * dt;
        let left = self.velocity_field();
        let mut pred: Vec<Vec2> = match &st.prev_velocity {
            Some(p) => st.velocity.iter().zip(p).map(|(a, b)| *a * 2.0 - *b).collect(),
            None => st.velocity.clone(),
        };
        self.extend(&mut pred);
        let mut pred_b: Vec<Vec2> = match &st.prev_boundary_u {
            Some(p) => st.boundary_u.iter().zip(p).map(|(a, b)| *a * 2.0 - *b).collect(),
            None => st.boundary_u.clone(),
        };
        let bsq_old: Vec<f64> = st.boundary_u.iter().map(|v| v.norm_sq()).collect();
        let mut out = None;
        let mut resid = 0.0;
        for _pass in 0..=self.config.corrector_passes {
            let right = VelocityField { grid: self.grid, samples: pred.clone(), outside: self.scenario.u0.clone() };
            let slab = TimeSlab { left: &left, right: &right };
            let (labels, stats) = advance_labels(&self.grid, &st.labels, &self.active, &self.scenario.domain, &slab, dt);
            let d_new = self.d_of(&pred);
            let q_new: Vec<Sym2> = st
                .q
                .par_iter()
                .zip(st.d.par_iter().zip(d_new.par_iter()))
                .map(|(q, (a, b))| *q + (*a + *b) * (0.5 * dt))
                .collect();
            let bq_new: Vec<f64> = st
                .bq
                .iter()
                .zip(bsq_old.iter().zip(&pred_b))
                .map(|(q, (a, b))| q + 0.5 * dt * (a + b.norm_sq()))
                .collect();
            let omega = VorticityField {
                grid: self.grid,
                labels,
                omega0: self.scenario.omega0.clone(),
                domain: self.scenario.domain.clone(),
            };
            let terms = self.rec.evaluate(t1, &omega, &q_new, &bq_new);
            let (vel, vb) = self.assemble(&terms);
            resid = self
                .target_nodes
                .iter()
                .map(|&k| (vel[k] - pred[k]).norm())
                .chain(vb.iter().zip(&pred_b).map(|(a, b)| (*a - *b).norm()))
                .fold(0.0f64, f64::max);
            pred = vel;
            pred_b = vb;
            out = Some((omega.labels, stats, q_new, bq_new, terms));
        }
        let (labels, stats, q, bq, terms) = out.expect("at least one pass");
        self.check_guardrails(t1, &labels, &pred, &pred_b, &stats)?;

        let right = VelocityField { grid: self.grid, samples: pred.clone(), outside: self.scenario.u0.clone() };
        let slab = TimeSlab { left: &left, right: &right };
        let (markers, marker_u) = advance_markers(&self.state.markers, &self.state.marker_u, &slab, dt);
        let d = self.d_of(&pred);

        let st = &mut self.state;
        st.transport.traced += stats.traced;
        st.transport.foot_projections += stats.foot_projections;
        st.transport.label_projections += stats.label_projections;
        st.prev_velocity = Some(std::mem::replace(&mut st.velocity, pred));
        st.prev_boundary_u = Some(std::mem::replace(&mut st.boundary_u, pred_b));
        st.labels = labels;
        st.q = q;
        st.d = d;
        st.bq = bq;
        st.terms = terms;
        st.markers = markers;
        st.marker_u = marker_u;
        st.identity_residual = resid;
        st.step += 1;
        st.t = t1;
        let s = self.s_norm()?.total();
        self.state.s_norm_max = self.state.s_norm_max.max(s);
        self.record_history();
        Ok(())
    }

    fn record_history(&mut self) {
        if !self.config.record_history {
            return;
        }
        self.history.times.push(self.state.t);
        self.history.velocity.push(self.state.velocity.clone());
        self.history.markers.push(self.state.markers.clone());
        self.history.marker_u.push(self.state.marker_u.clone());
    }

    fn check_guardrails(
        &self,
        t: f64,
        labels: &[Vec2],
        vel: &[Vec2],
        vb: &[Vec2],
        stats: &TransportStats,
    ) -> Result<(), SolverError> {
        let w0 = &self.scenario.omega0;
        let wmax = self.scenario.omega0_sup;
        for (k, l) in labels.iter().enumerate() {
            if self.active[k] {
                let w = w0(*l).abs();
                if !(w <= wmax) {
                    return Err(SolverError::Guardrail {
                        kind: GuardrailKind::VorticityBound,
                        t,
                        detail: format!("|omega| = {w} > {wmax} at node {k}"),
                    });
                }
            }
        }
        let mut umax = 0.0f64;
        for v in self.target_nodes.iter().map(|&k| vel[k]).chain(vb.iter().copied()) {
            if !v.is_finite() {
                return Err(SolverError::Guardrail { kind: GuardrailKind::NonFinite, t, detail: "velocity".into() });
            }
            umax = umax.max(v.norm());
        }
        let env = apriori_velocity_bound(self.scenario.u0_sup, t, self.config.fitted_constants.envelope)?;
        if umax > env {
            return Err(SolverError::Guardrail {
                kind: GuardrailKind::VelocityEnvelope,
                t,
                detail: format!("sup|u| = {umax} exceeds envelope {env}"),
            });
        }
        let frac = stats.foot_projections as f64 / self.target_nodes.len() as f64;
        if frac > self.config.tolerances.max_projection_fraction {
            return Err(SolverError::Guardrail {
                kind: GuardrailKind::ObstaclePenetration,
                t,
                detail: format!("{} feet projected ({frac:.3} of nodes); reduce dt", stats.foot_projections),
            });
        }
        Ok(())
    }

    pub fn s_norm(&self) -> Result<SerfatiNorm, SolverError> {
        Ok(serfati_norm(&self.grid, &self.state.velocity, Some(&self.active))?)
    }

    /// Circulation `\int_Gamma u . tau` from the boundary probes.
    pub fn circulation(&self) -> Option<f64> {
        let b = self.boundary.as_ref()?;
        let w = b.weight();
        Some(b.nodes.iter().zip(&self.state.boundary_u).map(|(nd, u)| u.dot(nd.tau) * w).sum())
    }

    pub fn max_normal_velocity(&self) -> Option<f64> {
        let b = self.boundary.as_ref()?;
        Some(b.nodes.iter().zip(&self.state.boundary_u).fold(0.0f64, |m, (nd, u)| m.max(u.dot(nd.n).abs())))
    }

    pub fn node_vorticity(&self) -> Vec<f64> {
        let w0 = &self.scenario.omega0;
        self.state.labels.iter().zip(&self.active).map(|(l, a)| if *a { w0(*l) } else { 0.0 }).collect()
    }

    pub fn conservation_row(&self) -> Result<ConservationRow, SolverError> {
        let w = self.node_vorticity();
        let sup_omega = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mass = (0..self.grid.len()).filter(|&k| self.active[k]).map(|k| w[k] * self.grid.trapezoid_weight(k)).sum();
        let sup_u = self
            .target_nodes
            .iter()
            .map(|&k| self.state.velocity[k].norm())
            .chain(self.state.boundary_u.iter().map(|v| v.norm()))
            .fold(0.0f64, f64::max);
        let alpha = self.config.fitted_constants.holder * self.state.s_norm_max;
        let diagnostics = flow_diagnostics(&self.grid, &self.state.labels, &self.state.velocity, &self.active, alpha, self.state.t);
        Ok(ConservationRow {
            step: self.state.step,
            t: self.state.t,
            sup_omega,
            sup_u,
            s_norm: self.s_norm()?,
            circulation: self.circulation(),
            vorticity_mass: mass,
            max_normal_velocity: self.max_normal_velocity(),
            diagnostics,
            tail_budget: self.state.terms.iter().fold(0.0f64, |m, p| m.max(p.tail)),
            identity_residual: self.state.identity_residual,
            foot_projections: self.state.transport.foot_projections,
        })
    }

    /// Largest change of the near-field term at every `stride`-th node target
    /// when the cutoff-ball rule is doubled.
    pub fn near_refinement_error(&self, stride: usize) -> Result<f64, SolverError> {
        let omega = self.vorticity_field();
        let fine = SerfatiSetup {
            quad: QuadratureSpec {
                radial_nodes: self.setup.quad.radial_nodes * 2,
                angular_nodes: self.setup.quad.angular_nodes * 2,
                ..self.setup.quad.clone()
            },
            ..self.setup.clone()
        };
        let idx: Vec<usize> = (0..self.target_nodes.len()).step_by(stride.max(1)).collect();
        let errs: Result<Vec<f64>, SerfatiError> = idx
            .par_iter()
            .map(|&i| {
                let x = self.rec.targets[i];
                let v = near_field_term(&fine, x, &|y| omega.diff(y))?;
                Ok((v - self.state.terms[i].near).norm())
            })
            .collect();
        Ok(errs?.into_iter().fold(0.0, f64::max))
    }

    /// `max |u - u_ref(t)| / max |u_ref(t)|` over target nodes, when the
    /// scenario has a reference trajectory.
    pub fn reference_error(&self) -> Option<f64> {
        let f = self.scenario.exact_u.as_ref()?;
        let t = self.state.t;
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for &k in &self.target_nodes {
            let r = f(t, self.grid.node_at(k));
            err = err.max((self.state.velocity[k] - r).norm());
            scale = scale.max(r.norm());
        }
        Some(if scale > 0.0 { err / scale } else { err })
    }

    /// `max |L - L_ref(t)|` over active nodes accepted by `mask`.
    pub fn label_error(&self, mask: &dyn Fn(Vec2) -> bool) -> Option<f64> {
        let f = self.scenario.exact_labels.as_ref()?;
        let t = self.state.t;
        Some(
            (0..self.grid.len())
                .filter(|&k| self.active[k] && mask(self.grid.node_at(k)))
                .map(|k| (self.state.labels[k] - f(t, self.grid.node_at(k))).norm())
                .fold(0.0, f64::max),
        )
    }

    pub fn snapshot(&self) -> Vec<NodeRecord> {
        let w = self.node_vorticity();
        (0..self.grid.len())
            .map(|k| {
                let x = self.grid.node_at(k);
                let u = self.state.velocity[k];
                let l = self.state.labels[k];
                NodeRecord { x1: x.x1, x2: x.x2, u1: u.x1, u2: u.x2, omega: w[k], label1: l.x1, label2: l.x2 }
            })
            .collect()
    }

    /// Run to `t_final`. `observer` sees the simulation after every step and
    /// whether a snapshot is due.
    pub fn run_with(&mut self, observer: &mut dyn FnMut(&Simulation, bool)) -> RunReport {
        let start = Instant::now();
        let steps = self.config.steps();
        let mut rows = Vec::with_capacity(steps + 1);
        let mut aborted = None;
        match self.conservation_row() {
            Ok(r) => rows.push(r),
            Err(e) => aborted = Some(e.to_string()),
        }
        observer(self, true);
        while aborted.is_none() && self.state.step < steps {
            if let Err(e) = self.step() {
                aborted = Some(e.to_string());
                observer(self, true);
                break;
            }
            match self.conservation_row() {
                Ok(r) => rows.push(r),
                Err(e) => {
                    aborted = Some(e.to_string());
                    break;
                }
            }
            let every = self.config.snapshot_every;
            let due = self.state.step == steps || (every > 0 && self.state.step.is_multiple_of(every));
            observer(self, due);
        }
        RunReport {
            scenario: self.scenario.name.clone(),
            steps: self.state.step,
            t_final: self.state.t,
            max_identity_residual: rows.iter().fold(0.0, |m, r| m.max(r.identity_residual)),
            max_tail_budget: rows.iter().fold(0.0, |m, r| m.max(r.tail_budget)),
            rows,
            runtime_secs: start.elapsed().as_secs_f64(),
            aborted,
        }
    }

    pub fn run(&mut self) -> RunReport {
        self.run_with(&mut |_, _| {})
    }
}

/// Build and run `config`; the report carries any guardrail abort.
pub fn run(config: RunConfig) -> Result<(Simulation, RunReport), SolverError> {
    let mut sim = Simulation::new(config)?;
    let rep = sim.run();
    Ok((sim, rep))
}
