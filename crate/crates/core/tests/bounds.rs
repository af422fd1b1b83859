use std::f64::consts::E;

use serfati::bounds::*;

#[test]
fn mu_and_nu_values() {
    assert!((mu(1.0 / E, 1.0) - 1.0 / E).abs() < 1e-15);
    assert_eq!(mu(0.0, 1.0), 0.0);
    assert_eq!(nu(0.0, 0.5, 2.0), 0.0);
    assert!((nu(1.0 / E, 0.0, 1.0) - 2.0 / E).abs() < 1e-15);
    let ratios: Vec<f64> = [1e-3, 1e-6, 1e-9].iter().map(|&r| nu(r, 0.5, 2.0) / mu(r, 1.0)).collect();
    let lim = 2.0 * 1.5;
    for w in ratios.windows(2) {
        assert!((w[1] - lim).abs() < (w[0] - lim).abs());
    }
    assert!((ratios[2] - lim).abs() < 0.1);
    // monotone and continuous on a dense sample, dominating -r log r
    let mut prev = 0.0;
    for k in 1..=10_000 {
        let r = 2.0 * k as f64 / 10_000.0;
        let m = mu(r, 1.0);
        assert!(m >= prev && (m - prev) < 2e-3);
        if r < 1.0 {
            assert!(m >= -r * r.ln() - 1e-15);
        }
        prev = m;
    }
}

#[test]
fn osgood_integrals_diverge_like_log_log() {
    let v = osgood_integral(1e-8, 1.0 / E, 1.0);
    let want = (1e8f64).ln().ln();
    assert!((v - want).abs() <= 1e-4 * want, "{v}");
    assert!((want - 2.914).abs() < 1e-3);
    let mut prev = 0.0;
    for d in [1e-4, 1e-16, 1e-64, 1e-256] {
        let v = osgood_integral(d, 1.0 / E, 1.0);
        let closed = (1.0 / d).ln().ln();
        assert!(v > prev && (v / closed - 1.0).abs() < 1e-3);
        prev = v;
    }
}

#[test]
fn osgood_lemma_checks() {
    let times: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
    let zeros = vec![0.0; times.len()];
    let ones = vec![1.0; times.len()];
    let m = |r: f64| mu(r, 1.0);
    assert_eq!(osgood_check(&times, &zeros, &ones, &m, 0.0, 1e-12), Verdict::Pass);

    let a = 1e-6;
    let (l, lhs, t) = osgood_equality_check(a, 1.0, 2000);
    assert!((l - osgood_equality_solution(a, 1.0)).abs() <= 1e-6 * l);
    assert!((lhs - t).abs() <= 1e-6);

    let lin: Vec<f64> = times.iter().map(|t| a * t.exp()).collect();
    let id = |r: f64| r;
    assert_eq!(osgood_check(&times, &lin, &ones, &id, a, 1e-9), Verdict::Pass);
    for (k, t) in times.iter().enumerate() {
        assert!(((lin[k] / a).ln() - t).abs() < 1e-12);
    }
    let bad: Vec<f64> = times.iter().map(|t| a + 10.0 * t).collect();
    assert_eq!(osgood_check(&times, &bad, &ones, &id, a, 1e-9), Verdict::Inconclusive);
}

#[test]
fn gamma_closed_form_example() {
    let p = BoundParams::new(1.0, 1.0, (-10.0f64).exp()).unwrap();
    let ct = (1.0 - (-2.0f64).exp()) / 2.0;
    assert!((ct - 0.432_332).abs() < 1e-6);
    let want = ct.exp() * (-10.0f64).exp().powf((-2.0f64).exp());
    let g = gamma_closed_form(&p, 1.0).unwrap();
    assert!((g - want).abs() <= 1e-14 * want);
    assert!(((gamma_numeric(&p, 1.0).unwrap() - g) / g).abs() <= 1e-6);
}

#[test]
fn gamma_methods_agree_on_a_grid() {
    for t in [0.1, 0.25, 0.5, 0.75, 1.0] {
        let mut prev = 0.0;
        for s0 in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
            let p = BoundParams::new(1.0, 1.0, s0).unwrap();
            let a = gamma_closed_form(&p, t).unwrap();
            let b = gamma_numeric(&p, t).unwrap_or_else(|e| panic!("t={t} s0={s0} {a}: {e}"));
            assert!(((a - b) / a).abs() <= 1e-6, "t={t} s0={s0}: {a} {b}");
            assert!(a > prev);
            prev = a;
        }
    }
    let p = BoundParams::new(1.0, 1.0, 0.5).unwrap();
    assert!(matches!(gamma_closed_form(&p, 1.0), Err(BoundsError::Branch(_))));
}

#[test]
fn continuous_dependence_bound_shape() {
    let p0 = BoundParams::new(1.0, 1.0, 0.0).unwrap();
    assert_eq!(cont_dep_bound(&p0, 1.0).unwrap(), 0.0);
    let mut prev = 0.0;
    let mut prev_ratio = 0.0;
    for s0 in [1e-4, 1e-6, 1e-8, 1e-10].iter().rev() {
        let p = BoundParams::new(1.0, 1.0, *s0).unwrap();
        let b = cont_dep_bound(&p, 1.0).unwrap();
        assert!(b > prev);
        prev = b;
    }
    for s0 in [1e-4, 1e-6, 1e-8, 1e-10] {
        let first = E * s0;
        let p = BoundParams::new(1.0, 1.0, s0).unwrap();
        let ratio = (cont_dep_bound(&p, 1.0).unwrap() - first) / first;
        assert!(ratio > prev_ratio);
        prev_ratio = ratio;
    }
    assert!(BoundParams::new(-1.0, 1.0, 0.1).is_err());
    assert!(cont_dep_bound(&BoundParams::new(1.0, 1.0, 1.0).unwrap(), 1.0).is_err());
}

#[test]
fn fitted_constant_is_tight() {
    let s0 = 1e-3;
    let samples = [(0.25, 2e-3), (0.5, 5e-3), (1.0, 1.2e-2)];
    let c = fit_cont_dep_constant(s0, &samples).unwrap();
    for &(t, m) in &samples {
        let p = BoundParams::new(c, t, s0).unwrap();
        assert!(cont_dep_bound(&p, t).unwrap() >= m);
    }
    let lower = BoundParams::new(0.99 * c, 1.0, s0).unwrap();
    assert!(samples.iter().any(|&(t, m)| cont_dep_bound(&lower, t).unwrap() < m));
}
