use std::f64::consts::PI;

use serfati::geometry::{Domain, Vec2};
use serfati::kernels::{k_free, Cutoff};
use serfati::quadrature::*;

fn spec(radial: usize, angular: usize) -> QuadratureSpec {
    QuadratureSpec { radial_nodes: radial, angular_nodes: angular, ..Default::default() }
}

#[test]
fn polar_integrals_of_singular_and_constant_integrands() {
    let c = Vec2::new(0.4, -1.1);
    let s = spec(64, 64);
    let plane = Domain::FullPlane;
    for r in [0.5, 1.0, 3.0] {
        let inv: f64 = singular_polar_integral(&plane, c, r, &s, |y| 1.0 / (y - c).norm()).unwrap();
        assert!((inv - 2.0 * PI * r).abs() < 1e-8);
        let area: f64 = singular_polar_integral(&plane, c, r, &s, |_| 1.0).unwrap();
        assert!((area - PI * r * r).abs() < 1e-10);
        let k: Vec2 = singular_polar_integral(&plane, c, r, &s, |y| k_free(y - c).unwrap_or(Vec2::ZERO)).unwrap();
        assert!(k.norm() < 1e-10);
    }
    assert!(singular_polar_integral::<f64>(&plane, c, 0.0, &s, |_| 1.0).is_err());
}

#[test]
fn clipped_region_inside_obstacle_is_empty() {
    let d = Domain::ExteriorUnitDisk;
    let v: f64 = singular_polar_integral(&d, Vec2::new(0.1, 0.2), 0.3, &spec(16, 16), |_| 1.0).unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn truncated_integral_with_known_tail() {
    let x = Vec2::new(1.0, 2.0);
    let s = QuadratureSpec { truncation_radius: Some(100.0), panel_nodes: 12, ..Default::default() };
    let (v, tail): (f64, f64) =
        truncated_plane_integral(&Domain::FullPlane, x, 1.0, 1.0, &s, |y| (y - x).norm().powi(-3)).unwrap();
    assert!((v - 2.0 * PI * (1.0 - 0.01)).abs() < 1e-4, "{v}");
    let (z, _): (f64, f64) = truncated_plane_integral(&Domain::FullPlane, x, 1.0, 1.0, &s, |_| 0.0).unwrap();
    assert_eq!(z, 0.0);
    let s2 = QuadratureSpec { truncation_radius: Some(200.0), ..s.clone() };
    let (_, tail2): (f64, f64) = truncated_plane_integral(&Domain::FullPlane, x, 1.0, 1.0, &s2, |_| 0.0).unwrap();
    assert!((tail2 - 0.5 * tail).abs() < 1e-15);
    let tiny = QuadratureSpec { truncation_radius: Some(1.5), ..s };
    assert!(truncated_plane_integral::<f64>(&Domain::FullPlane, x, 1.0, 1.0, &tiny, |_| 1.0).is_err());
}

#[test]
fn boundary_line_integrals() {
    let d = Domain::ExteriorUnitDisk;
    let b = d.boundary_sample(512).unwrap();
    let one = boundary_line_integral(&b, |_| 1.0);
    assert!((one.value - 2.0 * PI).abs() < 1e-12);
    // d/dsigma of exp(sin(sigma))
    let exact = boundary_line_integral(&b, |n| n.sigma.cos() * n.sigma.sin().exp());
    assert!(exact.value.abs() < 1e-10);
    let c = Cutoff::default();
    let eps = 0.5;
    let x = Vec2::new(3.0, 0.0);
    let far = boundary_line_integral(&b, |n| c.a_eps_jet(x - n.y, eps).1.dot(n.tau));
    assert_eq!(far.value, 0.0);
}

#[test]
fn lp_norms_of_newtonian_kernel() {
    let s = spec(64, 64);
    let plane = Domain::FullPlane;
    let x = Vec2::new(0.5, 0.5);
    let kf = |y: Vec2| k_free(y - x).map(|k| k.norm()).unwrap_or(0.0);
    for r in [0.5, 1.0, 2.0] {
        let l1 = lp_norm(&plane, &Region::Ball { center: x, radius: r }, 1.0, &s, kf).unwrap();
        assert!((l1 - r).abs() < 1e-6);
    }
    let v = lp_norm(&plane, &Region::Ball { center: x, radius: 1.0 }, 1.5, &s, kf).unwrap().powf(1.5);
    let want = 2.0 / (2.0 * PI).sqrt();
    assert!((v - want).abs() <= 1e-4 * want, "{v}");
    assert!((want - 0.797_885).abs() < 1e-6);
    let c = lp_norm(&plane, &Region::Ball { center: x, radius: 2.0 }, 2.0, &s, |_| 1.0).unwrap();
    assert!((c - (4.0 * PI).sqrt()).abs() < 1e-10);
    assert!(lp_norm(&plane, &Region::Ball { center: x, radius: 1.0 }, 0.5, &s, kf).is_err());
}

#[test]
fn refinement_converges_at_least_second_order() {
    // smooth non-polynomial integrand on a ball: Gaussian mass
    let c = Vec2::ZERO;
    let exact = PI * (1.0 - (-1.0f64).exp());
    let err = |n: usize| {
        let v: f64 = singular_polar_integral(&Domain::FullPlane, c, 1.0, &spec(n, 8), |y| (-y.norm_sq()).exp()).unwrap();
        (v - exact).abs()
    };
    let (e1, e2) = (err(2), err(4));
    assert!(e2 * 4.0 <= e1, "{e1} {e2}");
    // truncated integral: halving the panel ratio spacing at fixed truncation
    let x = Vec2::ZERO;
    let tr = |n: usize| {
        let s = QuadratureSpec { truncation_radius: Some(10.0), panel_nodes: n, transition_nodes: n, ..Default::default() };
        let (v, _): (f64, f64) =
            truncated_plane_integral(&Domain::FullPlane, x, 1.0, 1.0, &s, |y| (-y.norm()).exp()).unwrap();
        (v - 2.0 * PI * (2.0 * (-1.0f64).exp() - 11.0 * (-10.0f64).exp())).abs()
    };
    assert!(tr(2) >= 4.0 * tr(4), "{} {}", tr(2), tr(4));
}
