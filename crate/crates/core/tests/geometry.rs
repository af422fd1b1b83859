use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use serfati::geometry::*;

fn joukowski() -> JoukowskiMap {
    JoukowskiMap::new(1.0, 0.3).unwrap()
}

#[test]
fn perp_examples() {
    assert_eq!(perp(Vec2::new(1.0, 0.0)), Vec2::new(0.0, 1.0));
    assert_eq!(perp(Vec2::new(0.0, 1.0)), Vec2::new(-1.0, 0.0));
    assert_eq!(perp(Vec2::new(3.0, -4.0)), Vec2::new(4.0, 3.0));
    let v = Vec2::new(0.3, -2.5);
    assert_eq!(perp(perp(v)), -v);
}

#[test]
fn image_point_is_an_involution() {
    assert_eq!(image_point(Vec2::new(2.0, 0.0)).unwrap(), Vec2::new(0.5, 0.0));
    assert_eq!(image_point(Vec2::new(0.0, -4.0)).unwrap(), Vec2::new(0.0, -0.25));
    assert!(image_point(Vec2::ZERO).is_err());
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let y = Vec2::polar(rng.gen_range(1.0..50.0), rng.gen_range(0.0..2.0 * PI));
        worst = worst.max((image_point(image_point(y).unwrap()).unwrap() - y).norm() / y.norm());
        if (y.norm() - 1.0).abs() < 1e-15 {
            assert_eq!(image_point(y).unwrap(), y);
        }
    }
    assert!(worst <= 1e-12, "{worst}");
    let u = Vec2::polar(1.0, 0.7);
    assert!((image_point(u).unwrap() - u).norm() < 1e-15);
}

#[test]
fn unit_disk_boundary_sample() {
    let d = Domain::ExteriorUnitDisk;
    let b = d.boundary_sample(4).unwrap();
    assert!((b.length - 2.0 * PI).abs() < 1e-12);
    for (k, nd) in b.nodes.iter().enumerate() {
        let th = 0.5 * PI * k as f64;
        assert!((nd.y - Vec2::polar(1.0, th)).norm() < 1e-15);
        assert!((nd.y.norm() - 1.0).abs() < 1e-15);
        assert!((nd.tau.norm() - 1.0).abs() < 1e-15 && (nd.n.norm() - 1.0).abs() < 1e-15);
        assert!(nd.tau.dot(nd.n).abs() < 1e-15);
        // tau = -n^perp, n out of the fluid
        assert!((nd.tau + nd.n.perp()).norm() < 1e-15);
    }
    assert_eq!(b.nodes[0].y, Vec2::new(1.0, 0.0));
    assert_eq!(b.nodes[0].n, Vec2::new(-1.0, 0.0));
    assert!(Domain::FullPlane.boundary_sample(16).is_err());
}

#[test]
fn joukowski_map_properties() {
    let m = joukowski();
    let mut rng = StdRng::seed_from_u64(5);
    let dom = Domain::ExteriorObstacle(Arc::new(m));
    let mut pts = Vec::new();
    while pts.len() < 1000 {
        let x = Vec2::polar(rng.gen_range(1.0..20.0), rng.gen_range(0.0..2.0 * PI));
        if dom.contains(x) {
            pts.push(x);
        }
    }
    let mut cr = 0.0f64;
    for &x in &pts {
        let w = m.forward(x);
        assert!(w.norm() >= 1.0 - 1e-12);
        assert!((m.inverse(w) - x).norm() <= 1e-10 * (1.0 + x.norm()));
        let j = m.jacobian(x);
        cr = cr.max((j[0][0] - j[1][1]).abs()).max((j[0][1] + j[1][0]).abs());
    }
    assert!(cr <= 1e-8);
    for w in pts.windows(2) {
        let d = (w[0] - w[1]).norm();
        let dt = (m.forward(w[0]) - m.forward(w[1])).norm();
        assert!(dt <= m.lip_upper() * d * (1.0 + 1e-12) && dt >= m.lip_lower() * d * (1.0 - 1e-12));
    }
}

#[test]
fn second_derivative_decays_like_cube() {
    let m = joukowski();
    let norm3 = |t: Tensor3| t.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let mut prev = f64::INFINITY;
    for r in [10.0, 20.0, 40.0] {
        let mut worst = 0.0f64;
        for k in 0..32 {
            let y = Vec2::polar(r, 2.0 * PI * k as f64 / 32.0);
            worst = worst.max(norm3(m.second_derivative(y)) * r.powi(3));
        }
        assert!(worst <= prev * (1.0 + 1e-3), "{worst} after {prev}");
        prev = worst;
    }
    assert!(prev.is_finite() && prev < 2.0);
}

#[test]
fn obstacle_boundary_sample_is_unit_framed() {
    let dom = Domain::ExteriorObstacle(Arc::new(joukowski()));
    let b = dom.boundary_sample(256).unwrap();
    let (a, bb) = joukowski().semi_axes();
    // Ramanujan's ellipse perimeter
    let h = ((a - bb) / (a + bb)).powi(2);
    let per = PI * (a + bb) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
    assert!((b.length - per).abs() < 1e-6 * per, "{} vs {per}", b.length);
    for nd in &b.nodes {
        assert!((nd.tau.norm() - 1.0).abs() < 1e-10 && nd.tau.dot(nd.n).abs() < 1e-10);
        let e = (nd.y.x1 / a).powi(2) + (nd.y.x2 / bb).powi(2);
        assert!((e - 1.0).abs() < 1e-10);
    }
}
