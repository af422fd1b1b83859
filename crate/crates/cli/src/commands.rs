use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use serfati::bounds::{compare_runs, BoundParams};
use serfati::estimates::{self, certification_spec, suite_obstacle, EstimateReport};
use serfati::fields::{serfati_norm, Grid};
use serfati::geometry::{Domain, Vec2};
use serfati::initdata::check_sequence;
use serfati::kernels::KernelChoice;
use serfati::quadrature::QuadratureSpec;
use serfati::scenarios::{self, Scenario, ScenarioParams, SHIPPED};
use serfati::serfati::{serfati_residual, SerfatiSetup};
use serfati::solver::{FittedConstants, RunReport, Simulation, SolverError};

use crate::config::{resolve, Resolved};
use crate::output::{csv_bytes, gnuplot_script, OutDir};
use crate::{ApproxArgs, CertifyArgs, CliError, Command, CompareArgs, DomainArg, IdentityArgs, KernelArg, SimulateArgs};

pub fn execute(cmd: &Command, argv: &[String]) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a, argv),
        Command::CertifyKernels(a) => certify(a, argv),
        Command::CheckIdentity(a) => check_identity(a, argv),
        Command::ApproxInit(a) => approx_init(a, argv),
        Command::Compare(a) => compare(a, argv),
        Command::ListScenarios => list_scenarios(),
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn solver_err(e: SolverError) -> CliError {
    match e {
        SolverError::Guardrail { .. } => CliError::Guardrail(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

/// Baseline constants, plus the ones a run actually used when they differ.
fn fitted_json(used: Option<&FittedConstants>) -> Result<Value, CliError> {
    let b = estimates::baseline().map_err(usage)?;
    let mut v = json!({ "baseline_version": b.version, "baseline_solver": b.solver, "estimates": b.estimates });
    if let Some(u) = used {
        v["solver"] = serde_json::to_value(u).expect("json");
    }
    Ok(v)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    steps: usize,
    t_final: f64,
    max_identity_residual: f64,
    max_tail_budget: f64,
    aborted: &'a Option<String>,
}

/// Run one simulation, streaming snapshots into `out` as they fall due.
fn run_into(sim: &mut Simulation, out: &mut OutDir, prefix: &str) -> Result<RunReport, CliError> {
    let mut io_error: Option<CliError> = None;
    let scale = 0.25 * sim.config.h * 4.0 / sim.scenario.u0_sup.max(1e-12);
    let report = sim.run_with(&mut |s, due| {
        if !due || io_error.is_some() {
            return;
        }
        let name = format!("{prefix}snapshots/step_{:06}.csv", s.state.step);
        let script = format!("{prefix}snapshots/step_{:06}.gp", s.state.step);
        let res = csv_bytes(&s.snapshot()).and_then(|b| out.write(&name, &b)).and_then(|_| {
            let file = Path::new(&name).file_name().unwrap().to_string_lossy().into_owned();
            out.write(&script, gnuplot_script(&file, &format!("{} t = {}", s.scenario.name, s.state.t), scale).as_bytes())
        });
        if let Err(e) = res {
            io_error = Some(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    out.write_ndjson(&format!("{prefix}conservation.ndjson"), &report.rows)?;
    out.write_json(
        &format!("{prefix}summary.json"),
        &RunSummary {
            scenario: &report.scenario,
            steps: report.steps,
            t_final: report.t_final,
            max_identity_residual: report.max_identity_residual,
            max_tail_budget: report.max_tail_budget,
            aborted: &report.aborted,
        },
    )?;
    Ok(report)
}

fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let r = resolve(a.config.as_deref(), &a.overrides)?;
    let mut sim = Simulation::new(r.config.clone()).map_err(solver_err)?;
    let mut out = OutDir::create(&a.out)?;
    out.write_json("config.json", &r.json)?;
    let report = run_into(&mut sim, &mut out, "")?;
    out.write_json("timing.json", &json!({ "runtime_secs": report.runtime_secs }))?;
    out.manifest("simulate", argv, json!({ "config": r.json, "config_sha256": r.hash() }), fitted_json(Some(&r.config.fitted_constants))?)?;
    println!(
        "{}: {} steps to t = {}, max identity residual {:.3e}, tail budget {:.3e}",
        report.scenario, report.steps, report.t_final, report.max_identity_residual, report.max_tail_budget
    );
    match report.aborted {
        Some(why) => Err(CliError::Guardrail(why)),
        None => Ok(()),
    }
}

fn pairs(v: &[f64]) -> Result<Vec<Vec2>, CliError> {
    if !v.len().is_multiple_of(2) {
        return Err(usage(format!("expected x1,x2 pairs, got {} numbers", v.len())));
    }
    Ok(v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect())
}

fn certify(a: &CertifyArgs, argv: &[String]) -> Result<(), CliError> {
    let (domain, default_pts) = match a.domain {
        DomainArg::Plane => (Domain::FullPlane, vec![Vec2::ZERO, Vec2::new(3.0, -1.0), Vec2::new(-7.0, 2.0)]),
        DomainArg::Disk => (Domain::ExteriorUnitDisk, vec![Vec2::new(1.5, 0.0), Vec2::new(3.0, 0.0), Vec2::new(10.0, 0.0)]),
        DomainArg::Obstacle => (suite_obstacle(), vec![Vec2::new(1.6, 0.0), Vec2::new(3.0, 0.0), Vec2::new(10.0, 0.0)]),
    };
    let choice = match a.kernel {
        Some(KernelArg::Domain) => KernelChoice::Domain,
        Some(KernelArg::Hydrodynamic) => KernelChoice::Hydrodynamic,
        None if domain.has_boundary() => KernelChoice::Hydrodynamic,
        None => KernelChoice::Domain,
    };
    let pts = if a.points.is_empty() { default_pts } else { pairs(&a.points)? };
    if let Some(p) = pts.iter().find(|p| !domain.contains(**p)) {
        return Err(usage(format!("point {p:?} is not in the fluid")));
    }
    let spec = certification_spec();
    let near = estimates::certify_near_l1(&domain, choice, &a.eps, &pts, &spec).map_err(usage)?;
    let far = estimates::certify_far_l1(&domain, choice, &a.eps, &pts, &spec).map_err(usage)?;
    let reports = [near, far];
    for r in &reports {
        println!("{}: ratio in [{:.6}, {:.6}], spread {:.3}, {:?}", r.name, r.min_ratio, r.max_ratio, r.spread(), r.verdict);
    }
    if let Some(dir) = &a.out {
        let mut out = OutDir::create(dir)?;
        for r in &reports {
            out.write(&format!("{}.csv", r.name), r.to_csv().as_bytes())?;
        }
        out.write_json("reports.json", &reports.iter().collect::<Vec<&EstimateReport>>())?;
        let inputs = json!({ "domain": format!("{:?}", a.domain).to_lowercase(), "kernel": format!("{choice:?}"), "eps": a.eps, "points": pts, "quadrature": spec });
        out.manifest("certify-kernels", argv, inputs, fitted_json(None)?)?;
    }
    Ok(())
}

fn build_scenario(name: &str) -> Result<Scenario, CliError> {
    scenarios::build(name, &ScenarioParams::default()).map_err(usage)
}

fn check_identity(a: &IdentityArgs, argv: &[String]) -> Result<(), CliError> {
    let sc = build_scenario(&a.scenario)?;
    let x = match pairs(&a.x)?.as_slice() {
        [x] => *x,
        _ => return Err(usage("--x takes exactly one point")),
    };
    if !sc.domain.contains(x) {
        return Err(usage(format!("point {x:?} is not in the fluid")));
    }
    if !(a.t >= 0.0 && a.t.is_finite()) {
        return Err(usage(format!("t must be >= 0, got {}", a.t)));
    }
    let traj = sc.exact_trajectory(a.t).ok_or_else(|| usage(format!("scenario '{}' has no exact trajectory", sc.name)))?;
    let setup = SerfatiSetup::new(sc.domain.clone(), a.eps, QuadratureSpec::default()).map_err(usage)?;
    let r = serfati_residual(&setup, &traj, x, a.t, a.time_nodes).map_err(usage)?;
    let within = r.value.norm() <= r.budget;
    let rec = json!({
        "scenario": sc.name,
        "t": a.t,
        "x": x,
        "eps": a.eps,
        "residual": r.value,
        "near": r.near,
        "far": r.far,
        "boundary": r.boundary,
        "budget": r.budget,
        "within_budget": within,
        "expected_solution": sc.serfati,
    });
    println!("{}", serde_json::to_string(&rec).expect("json"));
    if let Some(dir) = &a.out {
        let mut out = OutDir::create(dir)?;
        out.write_json("residual.json", &rec)?;
        out.manifest("check-identity", argv, json!({ "scenario": sc.name, "t": a.t, "x": x, "eps": a.eps, "time_nodes": a.time_nodes }), fitted_json(None)?)?;
    }
    Ok(())
}

fn approx_init(a: &ApproxArgs, argv: &[String]) -> Result<(), CliError> {
    let sc = build_scenario(&a.scenario)?;
    if a.n.is_empty() {
        return Err(usage("--n needs at least one index"));
    }
    let grid = Grid::square(sc.window_center, a.half, a.nodes).map_err(usage)?;
    let bs = if sc.domain.has_boundary() { a.boundary_samples } else { 0 };
    let checks = check_sequence(&sc.domain, sc.u0.clone(), &a.n, &grid, bs).map_err(usage)?;
    for c in &checks {
        println!(
            "n = {:3}: sup|u_n - u| = {:.4e}, ||u_n||_S = {:.4}, tangency = {:.2e}, div = {:.2e}",
            c.n, c.sup_diff, c.s_norm, c.tangency, c.divergence
        );
    }
    if let Some(dir) = &a.out {
        let mut out = OutDir::create(dir)?;
        out.write_csv("sequence.csv", &checks)?;
        out.manifest("approx-init", argv, json!({ "scenario": sc.name, "n": a.n, "half": a.half, "nodes": a.nodes, "boundary_samples": bs }), fitted_json(None)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparisonRow {
    t: f64,
    h: f64,
    p: f64,
    m: f64,
    u_diff: f64,
    bound: Option<f64>,
}

fn compare(a: &CompareArgs, argv: &[String]) -> Result<(), CliError> {
    let with_history = |r: Resolved| -> Resolved {
        let mut r = r;
        r.config.record_history = true;
        r.json["record_history"] = Value::Bool(true);
        r
    };
    let ra = with_history(resolve(Some(&a.config), &a.overrides)?);
    let rb = with_history(resolve(Some(&a.against), &a.overrides)?);
    let mut sa = Simulation::new(ra.config.clone()).map_err(solver_err)?;
    let mut sb = Simulation::new(rb.config.clone()).map_err(solver_err)?;
    if sa.grid != sb.grid {
        return Err(usage(format!("grids differ: {:?} vs {:?}", sa.grid, sb.grid)));
    }
    if sa.config.dt != sb.config.dt || sa.config.steps() != sb.config.steps() || sa.config.marker_stride != sb.config.marker_stride {
        return Err(usage("time steps, final times or marker strides differ"));
    }
    let s0 = match a.s0 {
        Some(s) => s,
        None => {
            let d: Vec<Vec2> = sa.state.velocity.iter().zip(&sb.state.velocity).map(|(p, q)| *p - *q).collect();
            let both: Vec<bool> = sa.active.iter().zip(&sb.active).map(|(p, q)| *p && *q).collect();
            serfati_norm(&sa.grid, &d, Some(&both)).map_err(usage)?.total()
        }
    };
    let b = estimates::baseline().map_err(usage)?;
    let params = BoundParams::new(b.solver.cont_dep, sa.config.t_final.max(f64::MIN_POSITIVE), s0).map_err(usage)?;
    let mut out = OutDir::create(&a.out)?;
    out.write_json("a/config.json", &ra.json)?;
    out.write_json("b/config.json", &rb.json)?;
    let rep_a = run_into(&mut sa, &mut out, "a/")?;
    let rep_b = run_into(&mut sb, &mut out, "b/")?;
    for (rep, tag) in [(&rep_a, "a"), (&rep_b, "b")] {
        if let Some(why) = &rep.aborted {
            return Err(CliError::Guardrail(format!("run {tag}: {why}")));
        }
    }
    let cmp = compare_runs(&sa.history, &sb.history, &params, 1e-6).map_err(usage)?;
    let rows: Vec<ComparisonRow> = (0..cmp.times.len())
        .map(|k| ComparisonRow { t: cmp.times[k], h: cmp.h[k], p: cmp.p[k], m: cmp.m[k], u_diff: cmp.u_diff[k], bound: cmp.bound[k] })
        .collect();
    out.write_csv("comparison.csv", &rows)?;
    out.write_json("comparison.json", &json!({ "s0": s0, "cont_dep_constant": b.solver.cont_dep, "h_within_m": cmp.h_within_m, "within_bound": cmp.within_bound }))?;
    let inputs = json!({
        "a": { "config": ra.json, "config_sha256": ra.hash() },
        "b": { "config": rb.json, "config_sha256": rb.hash() },
        "s0": s0,
    });
    out.manifest("compare", argv, inputs, fitted_json(None)?)?;
    let last = rows.last().expect("at least the initial time");
    println!(
        "s0 = {s0:.3e}: final |u1 - u2| = {:.3e}, bound {:?}, h <= M: {}, within bound: {}",
        last.u_diff, last.bound, cmp.h_within_m, cmp.within_bound
    );
    Ok(())
}

#[derive(Serialize)]
struct CatalogueRow {
    name: String,
    domain: String,
    stationary: bool,
    experimental: bool,
    solution: bool,
    exact_reference: bool,
}

fn list_scenarios() -> Result<(), CliError> {
    let mut rows = Vec::new();
    for name in SHIPPED {
        let sc = build_scenario(name)?;
        rows.push(CatalogueRow {
            name: sc.name.clone(),
            domain: serde_json::to_value(sc.domain.kind()).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            stationary: sc.stationary,
            experimental: sc.experimental,
            solution: sc.serfati,
            exact_reference: sc.exact_u.is_some(),
        });
    }
    let bytes = csv_bytes(&rows)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    for name in ["constant-vorticity", "semi-infinite-strip"] {
        if let Err(e) = scenarios::build(name, &ScenarioParams::default()) {
            println!("# refused: {e}");
        }
    }
    Ok(())
}
