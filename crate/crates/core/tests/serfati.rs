use std::f64::consts::PI;

use serfati::fields::Sym2;
use serfati::geometry::{Domain, Vec2};
use serfati::quadrature::QuadratureSpec;
use serfati::scenarios::RadialBump;
use serfati::serfati::*;

fn plane(eps: f64) -> SerfatiSetup {
    SerfatiSetup::new(Domain::FullPlane, eps, QuadratureSpec::default()).unwrap()
}

fn disk(eps: f64) -> SerfatiSetup {
    SerfatiSetup::new(Domain::ExteriorUnitDisk, eps, QuadratureSpec::default()).unwrap()
}

fn vortex(y: Vec2) -> Vec2 {
    y.perp() / y.norm()
}

#[test]
fn setup_rejects_bad_scales() {
    assert!(SerfatiSetup::new(Domain::FullPlane, 0.0, QuadratureSpec::default()).is_err());
    let short = QuadratureSpec { truncation_radius: Some(1.0), ..Default::default() };
    assert!(SerfatiSetup::new(Domain::FullPlane, 1.0, short).is_err());
}

#[test]
fn near_field_examples() {
    let s = plane(0.5);
    let x = Vec2::new(0.2, 0.7);
    assert_eq!(near_field_term(&s, x, &|_| 0.0).unwrap(), Vec2::ZERO);
    let ball = |y: Vec2| if (y - x).norm() <= 0.25 { 1.0 } else { 0.0 };
    assert!(near_field_term(&s, x, &ball).unwrap().norm() < 1e-8);

    let b = RadialBump { center: Vec2::new(0.5, 0.4), amplitude: 2.0, radius: 1.0 };
    for eps in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let v = near_field_term(&plane(eps), x, &|y| b.omega(y)).unwrap();
        // L1 norm of a_eps K is 0.75 eps
        assert!(v.norm() <= 0.75 * eps * b.amplitude * (1.0 + 1e-9), "{eps}: {v:?}");
    }
}

#[test]
fn far_field_of_constant_and_zero_flows() {
    let s = plane(1.0);
    let x = Vec2::new(-0.3, 1.2);
    let z = far_field_term(&s, x, &|_| Sym2::outer(Vec2::ZERO), 0.0).unwrap();
    assert_eq!(z.value, Vec2::ZERO);
    let c = Vec2::new(0.6, -0.8);
    let f = far_field_term(&s, x, &|_| Sym2::outer(c), 1.0).unwrap();
    assert!(f.value.norm() <= f.tail + 1e-10, "{f:?}");
    let inc = far_field_increment(&s, x, &|_| c, &|_| c, 0.1, 1.0).unwrap();
    assert!((inc.value - f.value * 0.1).norm() < 1e-15);
}

#[test]
fn far_field_of_radial_vortex_vanishes() {
    for spec in [QuadratureSpec::default(), QuadratureSpec { far_angular_nodes: Some(128), panel_nodes: 10, ..Default::default() }] {
        let s = SerfatiSetup::new(Domain::ExteriorUnitDisk, 1.0, spec).unwrap();
        for x in [Vec2::new(1.5, 0.0), Vec2::new(-2.0, 2.0), Vec2::new(0.0, -4.0)] {
            let f = far_field_term(&s, x, &|y| Sym2::outer(vortex(y)), 1.0).unwrap();
            assert!(f.value.norm() <= 1e-4 + f.tail, "{x:?}: {f:?}");
        }
    }
}

#[test]
fn boundary_term_examples() {
    let s = disk(1.0);
    let b = Domain::ExteriorUnitDisk.boundary_sample(512).unwrap();
    let ones = vec![1.0; b.nodes.len()];
    for x in [Vec2::new(1.2, 0.3), Vec2::new(0.0, 1.6)] {
        assert!(boundary_increment(&s, x, &b, &ones, &ones, 0.1).unwrap().norm() < 1e-10);
    }
    let far = Vec2::new(3.0, 0.0);
    let speed: Vec<f64> = b.nodes.iter().map(|n| (1.0 + 0.5 * n.y.x2).powi(2)).collect();
    assert_eq!(boundary_increment(&s, far, &b, &speed, &speed, 0.1).unwrap(), Vec2::ZERO);
    assert!(boundary_increment(&s, far, &b, &speed[1..], &speed, 0.1).is_err());

    let umax2 = 1.5f64 * 1.5;
    let mut scaled = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        let x = Vec2::new(1.0 + 0.6 * eps, 0.0).perp();
        let v = boundary_increment(&disk(eps), x, &b, &speed, &speed, 0.1).unwrap();
        scaled.push(v.norm() * eps / (umax2 * 0.1));
    }
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    assert!(hi > 0.0 && hi < 1.0, "{scaled:?}");
}

#[test]
fn envelope() {
    assert_eq!(apriori_velocity_bound(1.0, 0.0, 2.0).unwrap(), 2.0);
    let mut prev = 0.0;
    for k in 0..10 {
        let v = apriori_velocity_bound(1.0, 0.1 * k as f64, 2.0).unwrap();
        assert!(v > prev);
        prev = v;
    }
    assert!(apriori_velocity_bound(3.0, 0.0, 2.0).is_err());
}

#[test]
fn galilean_residual_grows_linearly() {
    let traj = FnTrajectory { u: |t: f64, _| Vec2::new(t, 0.0), omega: |_, _| 0.0, speed_bound: 1.0 };
    let s = plane(0.5);
    for t in [0.25, 0.5, 1.0] {
        let r = serfati_residual(&s, &traj, Vec2::new(0.3, -0.1), t, 4).unwrap();
        assert!((r.value / t - Vec2::new(1.0, 0.0)).norm() <= r.budget / t, "{t}: {r:?}");
        assert!((r.value - Vec2::new(t, 0.0)).norm() <= 0.05 * t);
    }
}

#[test]
fn genuine_solutions_have_residual_within_budget() {
    let traj = FnTrajectory { u: |_, y: Vec2| vortex(y), omega: |_, y: Vec2| 1.0 / y.norm(), speed_bound: 1.0 };
    let s = disk(1.0);
    for x in [Vec2::new(1.3, 0.2), Vec2::new(-2.5, 1.0)] {
        let r = serfati_residual(&s, &traj, x, 1.0, 4).unwrap();
        assert!(r.value.norm() <= r.budget, "{r:?}");
        assert_eq!(r.near, Vec2::ZERO);
    }
    let b = RadialBump { center: Vec2::ZERO, amplitude: 4.0, radius: 1.0 };
    let traj = FnTrajectory { u: move |_, y| b.velocity(y), omega: move |_, y| b.omega(y), speed_bound: b.speed_sup() };
    for x in [Vec2::new(0.3, 0.1), Vec2::new(2.0, -1.0)] {
        let r = serfati_residual(&plane(0.5), &traj, x, 0.5, 4).unwrap();
        assert!(r.value.norm() <= r.budget, "{r:?}");
        assert!(r.value.norm() < 1e-5);
    }
}

#[test]
fn budget_reflects_the_tail() {
    let s = plane(0.5);
    let u = 2.0 * PI;
    let x = Vec2::ZERO;
    let a = s.tail_rate(x, u);
    let s2 = SerfatiSetup { quad: QuadratureSpec { truncation_radius: Some(50.0), ..Default::default() }, ..s.clone() };
    assert!(s2.tail_rate(x, u) < a);
}
