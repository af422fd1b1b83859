use std::f64::consts::PI;

use serfati::estimates::*;
use serfati::geometry::{Domain, Vec2};
use serfati::kernels::KernelChoice;
use serfati::quadrature::QuadratureSpec;

fn doubled(s: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec {
        radial_nodes: 2 * s.radial_nodes,
        angular_nodes: 2 * s.angular_nodes,
        far_angular_nodes: s.far_angular_nodes.map(|n| 2 * n),
        transition_nodes: 2 * s.transition_nodes,
        panel_nodes: 2 * s.panel_nodes,
        ..s.clone()
    }
}

#[test]
fn plane_near_ratio_is_cutoff_mean() {
    // int_{B_eps} a_eps |K| = eps * int_0^1 a(s) ds = 0.75 eps for the shipped profile
    let r = certify_near_l1(
        &Domain::FullPlane,
        KernelChoice::Domain,
        &SUITE_EPS,
        &[Vec2::ZERO, Vec2::new(2.0, 5.0)],
        &certification_spec(),
    )
    .unwrap();
    for row in &r.rows {
        assert!((row.ratio - 0.75).abs() < 1e-6, "{row:?}");
        assert!((0.5..=1.0).contains(&row.ratio));
    }
    assert_eq!(r.verdict, EstimateVerdict::Bounded);
}

#[test]
fn plane_far_is_scale_and_translation_invariant() {
    let xs = [Vec2::ZERO, Vec2::new(3.0, -1.0), Vec2::new(-7.0, 2.0)];
    let r = certify_far_l1(&Domain::FullPlane, KernelChoice::Domain, &SUITE_EPS, &xs, &certification_spec()).unwrap();
    assert!(r.spread() < 1.0 + 1e-3, "spread {}", r.spread());
    assert!(r.spread() <= 2.0);
}

#[test]
fn disk_j_bounded_and_k_domain_needs_eps_squared() {
    let spec = certification_spec();
    let xs = [Vec2::new(1.5, 0.0), Vec2::new(3.0, 0.0), Vec2::new(10.0, 0.0)];
    let dj = certify_near_l1(&Domain::ExteriorUnitDisk, KernelChoice::Hydrodynamic, &SUITE_EPS, &xs, &spec).unwrap();
    assert!(dj.max_ratio <= 1.0 && dj.spread() < 2.0);

    let dk = certify_near_l1(&Domain::ExteriorUnitDisk, KernelChoice::Domain, &SUITE_EPS, &xs[..1], &spec).unwrap();
    let over_eps: Vec<f64> = dk.rows.iter().map(|r| r.value / r.param).collect();
    assert!(over_eps.last().unwrap() > &(2.0 * over_eps[0]), "{over_eps:?}");
    assert!(dk.max_ratio < 1.0);

    let big: Vec<f64> = SUITE_EPS.iter().copied().filter(|e| *e >= 2.0).collect();
    let fj = certify_far_l1(&Domain::ExteriorUnitDisk, KernelChoice::Hydrodynamic, &big, &xs, &spec).unwrap();
    assert!(fj.spread() < 2.0, "spread {}", fj.spread());
}

#[test]
fn rearrangement_closed_form_and_p_limit() {
    let spec = certification_spec();
    let r = certify_rearrangement(&Domain::FullPlane, KernelChoice::Domain, &[1.5], &[1.0], Vec2::ZERO, &spec).unwrap();
    let exact = 2.0 / (2.0 * PI).sqrt();
    assert!((r.rows[0].value - exact).abs() < 1e-8 * exact);
    assert!((r.rows[0].ratio - 0.398_942_280_4).abs() < 1e-8);

    // value (2-p) -> (2 pi)^{-1} R^{2-p}
    let ps = [1.9, 1.95, 1.98];
    let r = certify_rearrangement(&Domain::FullPlane, KernelChoice::Domain, &ps, &[1.0], Vec2::new(4.0, 1.0), &spec).unwrap();
    for row in &r.rows {
        let want = (2.0 * PI).powf(1.0 - row.aux);
        assert!((row.value * (2.0 - row.aux) - want).abs() < 1e-6, "{row:?}");
    }

    assert!(certify_rearrangement(&Domain::FullPlane, KernelChoice::Domain, &[2.0], &[1.0], Vec2::ZERO, &spec).is_err());
}

#[test]
fn hlog_ratios_bounded() {
    for pair in [HlogPair::Rotation, HlogPair::RadialVortex, HlogPair::Translation] {
        let r = certify_hlog(pair, &SUITE_DELTA, 1e-9).unwrap();
        assert!(r.spread() < 1.3, "{} {}", r.name, r.spread());
        assert_eq!(r.verdict, EstimateVerdict::Bounded);
    }
    assert!(certify_hlog(HlogPair::Rotation, &[0.5], 1e-9).is_err());
}

#[test]
fn pointwise_lemmas() {
    let checks = certify_pointwise(100_000, 11);
    for c in &checks {
        assert!(c.holds, "{c:?}");
    }
    let inf = checks.iter().find(|c| c.name == "lemma56.inf").unwrap();
    assert_eq!(inf.worst, 2.0);
    let (x, y, v) = lemma56_extremal(3.0);
    assert_eq!((x, y, v), (Vec2::new(-2.0, 0.0), Vec2::new(1.0, 0.0), 2.0));
}

#[test]
fn suite_matches_baseline_and_is_node_stable() {
    let spec = certification_spec();
    let reports = standard_suite(&spec).unwrap();
    let b = baseline().unwrap();
    assert_eq!(reports.len(), b.estimates.len());
    for r in &reports {
        assert_eq!(r.verdict, EstimateVerdict::Bounded, "{}", r.name);
        let drift = regression(&r.name, r.max_ratio).unwrap();
        assert!(drift <= 0.10, "{} drifted {drift}", r.name);
    }

    let fine = doubled(&spec);
    let xs = [Vec2::new(1.6, 0.0), Vec2::new(3.0, 0.0)];
    let dom = suite_obstacle();
    for choice in [KernelChoice::Domain, KernelChoice::Hydrodynamic] {
        let a = certify_far_l1(&dom, choice, &[0.5, 4.0], &xs, &spec).unwrap();
        let c = certify_far_l1(&dom, choice, &[0.5, 4.0], &xs, &fine).unwrap();
        for (p, q) in a.rows.iter().zip(&c.rows) {
            assert!((p.value - q.value).abs() <= 0.01 * q.value, "{p:?} {q:?}");
        }
        let a = certify_rearrangement(&dom, choice, &SUITE_P, &[2.0], xs[0], &spec).unwrap();
        let c = certify_rearrangement(&dom, choice, &SUITE_P, &[2.0], xs[0], &fine).unwrap();
        for (p, q) in a.rows.iter().zip(&c.rows) {
            assert!((p.value - q.value).abs() <= 0.01 * q.value, "{p:?} {q:?}");
        }
    }
}

#[test]
fn report_csv_has_a_row_per_sample() {
    let r = certify_hlog(HlogPair::Translation, &[1e-3, 1e-2], 1e-8).unwrap();
    assert_eq!(r.to_csv().lines().count(), 3);
}
