use serfati::bounds::{compare_runs, BoundParams, BoundsError};
use serfati::fields::direct_biot_savart;
use serfati::geometry::Vec2;
use serfati::quadrature::QuadratureSpec;
use serfati::scenarios::{build, ScenarioParams};
use serfati::solver::*;

fn cfg(scenario: &str, h: f64, dt: f64, t_final: f64) -> RunConfig {
    RunConfig { scenario: scenario.into(), h, dt, t_final, ..Default::default() }
}

#[test]
fn zero_flow_only_advances_time() {
    let (sim, rep) = run(cfg("galilean-nonexample", 0.25, 0.125, 0.5)).unwrap();
    assert!(rep.aborted.is_none());
    assert_eq!(rep.steps, 4);
    assert_eq!(sim.state.t, 0.5);
    assert!(sim.state.velocity.iter().all(|v| *v == Vec2::ZERO));
    assert_eq!(sim.state.labels, sim.grid.nodes());
    assert!(rep.rows.iter().all(|r| r.sup_omega == 0.0 && r.sup_u == 0.0));
}

#[test]
fn radial_vortex_stays_put() {
    let mut c = cfg("radial-exterior", 0.25, 0.01, 1.0);
    c.boundary_nodes = 512;
    let mut sim = Simulation::new(c).unwrap();
    let u0: Vec<Vec2> = sim.state.velocity.clone();
    let c0 = sim.circulation().unwrap();
    assert!((c0 - 2.0 * std::f64::consts::PI).abs() < 1e-9, "{c0}");
    let mut worst = 0.0f64;
    while sim.state.step < 100 {
        sim.step().unwrap();
        for &k in sim.target_nodes() {
            worst = worst.max((sim.state.velocity[k] - u0[k]).norm());
        }
        assert!(sim.max_normal_velocity().unwrap() <= 1e-6);
        // coarse grid: the drift is 1.6e-4 at 65 nodes per side
        assert!((sim.circulation().unwrap() - c0).abs() <= 2.5e-3);
    }
    assert!(worst <= 5e-3, "{worst}");
    let lab = sim.label_error(&|x| x.norm() > 1.25 && x.norm() < 2.5).unwrap();
    assert!(lab <= 1e-2, "{lab}");
}

#[test]
fn perturbed_blob_tracks_direct_biot_savart() {
    let mut sim = Simulation::new(cfg("perturbed-blob", 0.125, 1.0 / 64.0, 20.0 / 64.0)).unwrap();
    let spec = QuadratureSpec::default();
    while sim.state.step < 20 {
        sim.step().unwrap();
        if !sim.state.step.is_multiple_of(10) {
            continue;
        }
        let w = sim.vorticity_field();
        let support = sim.scenario.support.map(|s| serfati::fields::SupportDisk { radius: s.radius + 0.1, ..s });
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for &k in sim.target_nodes().iter().step_by(7) {
            let x = sim.grid.node_at(k);
            let d = direct_biot_savart(&sim.scenario.domain, &|y| w.at(y), support, x, &spec).unwrap();
            err = err.max((sim.state.velocity[k] - d).norm());
            scale = scale.max(d.norm());
        }
        assert!(err <= 1e-2 * scale, "step {}: {err} / {scale}", sim.state.step);
    }
}

#[test]
fn disk_blob_conserves_circulation_and_node_vorticity() {
    let (sim, rep) = run(cfg("disk-blob", 0.25, 1.0 / 32.0, 0.5)).unwrap();
    assert!(rep.aborted.is_none(), "{:?}", rep.aborted);
    let c0 = rep.rows[0].circulation.unwrap();
    let sup0 = sim.scenario.omega0_sup;
    for r in &rep.rows {
        assert!((r.circulation.unwrap() - c0).abs() <= 1e-3, "{} vs {c0}", r.circulation.unwrap());
        assert!(r.sup_omega <= sup0);
        assert!(r.max_normal_velocity.unwrap() <= 1e-6);
    }
}

#[test]
fn blob_is_stationary_and_conserves_mass() {
    let (sim, rep) = run(cfg("blob", 0.0625, 1.0 / 32.0, 0.5)).unwrap();
    assert!(rep.aborted.is_none());
    let m0 = rep.rows[0].vorticity_mass;
    let sup0 = rep.rows[0].sup_omega;
    assert!(sup0 <= sim.scenario.omega0_sup);
    for r in &rep.rows {
        assert_eq!(r.sup_omega, sup0);
        assert!((r.vorticity_mass - m0).abs() <= 1e-3 * m0.abs(), "{} vs {m0}", r.vorticity_mass);
        assert!(r.identity_residual.is_finite());
    }
    let e = sim.reference_error().unwrap();
    assert!(e <= 2e-2, "{e}");
    let lab = sim.label_error(&|x| x.norm() < 0.9).unwrap();
    assert!(lab <= 1e-2, "{lab}");
}

#[test]
fn runs_are_bitwise_deterministic() {
    let c = cfg("perturbed-blob", 0.25, 1.0 / 16.0, 0.25);
    let (a, _) = run(c.clone()).unwrap();
    let (b, _) = run(c).unwrap();
    let (sa, sb) = (a.snapshot(), b.snapshot());
    assert_eq!(sa.len(), sb.len());
    for (p, q) in sa.iter().zip(&sb) {
        assert_eq!(p.u1.to_bits(), q.u1.to_bits());
        assert_eq!(p.u2.to_bits(), q.u2.to_bits());
        assert_eq!(p.label1.to_bits(), q.label1.to_bits());
    }
}

#[test]
fn paired_runs_compare() {
    let c = cfg("blob", 0.25, 1.0 / 16.0, 0.25);
    let (a, _) = run(c.clone()).unwrap();
    let p = BoundParams::new(1.0, 0.25, 1e-3).unwrap();
    let same = compare_runs(&a.history, &a.history, &p, 1e-6).unwrap();
    assert!(same.u_diff.iter().all(|d| *d == 0.0) && same.h_within_m);

    let pert = RunConfig { scenario: "perturbed-blob".into(), params: ScenarioParams { perturbation: Some(1e-3), ..Default::default() }, ..c.clone() };
    let (b, _) = run(pert).unwrap();
    let rep = compare_runs(&a.history, &b.history, &p, 1e-6).unwrap();
    assert!(rep.h_within_m, "{rep:?}");
    assert!(rep.u_diff[0] > 0.0 && rep.u_diff[0] <= 1e-3);

    let (fine, _) = run(RunConfig { h: 0.125, ..c }).unwrap();
    assert!(matches!(compare_runs(&a.history, &fine.history, &p, 1e-6), Err(BoundsError::Mismatch(_))));
}

#[test]
fn config_validation() {
    assert!(Simulation::new(cfg("blob", 0.25, 0.1, 0.25)).is_err());
    assert!(Simulation::new(cfg("blob", -1.0, 0.1, 0.2)).is_err());
    assert!(Simulation::new(RunConfig { marker_stride: 0, ..cfg("blob", 0.25, 0.125, 0.25) }).is_err());
    assert!(Simulation::new(cfg("constant-vorticity", 0.25, 0.125, 0.25)).is_err());
    let mut ok = Simulation::new(RunConfig { allow_experimental: true, ..cfg("periodic", 0.25 * std::f64::consts::PI, 0.125, 0.25) });
    assert!(ok.is_ok() || matches!(ok, Err(SolverError::Config(_))));
    if let Ok(s) = ok.as_mut() {
        assert!(s.scenario.experimental);
    }
    let sc = build("blob", &Default::default()).unwrap();
    let sim = Simulation::with_scenario(cfg("blob", 0.25, 0.125, 0.0), sc).unwrap();
    assert_eq!(sim.config.steps(), 0);
}
