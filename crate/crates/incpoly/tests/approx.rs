use incpoly::approx::*;
use incpoly::geometry::{make_compact, make_contour, SetDescriptor};
use incpoly::poly::Polynomial;
use incpoly::xprec::Precision;
use incpoly::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn circle(center: C64, r: f64, count: usize) -> Vec<C64> {
    (0..count)
        .map(|k| center + C64::from_polar(r, 2.0 * PI * k as f64 / count as f64))
        .collect()
}

fn quick() -> FitOptions {
    FitOptions {
        skip_monomial: true,
        ..FitOptions::default()
    }
}

#[test]
fn constant_on_unit_circle_cannot_be_improved() {
    // z^v p(z) has zero mean over equispaced samples, so the polygonal optimum is 1.
    let ks = circle(C64::new(0.0, 0.0), 1.0, 64);
    let kv = vec![C64::new(1.0, 0.0); ks.len()];
    for &(n, tau) in &[(8usize, 2.0), (12, 4.0), (20, 1.5)] {
        let r = minimax_on_samples(&ks, &kv, &[], n, tau, &quick()).unwrap();
        let t = r.lp_value.unwrap();
        assert!((t - 1.0).abs() < 1e-9, "n={n} tau={tau} t={t}");
        assert!(r.err_k >= 1.0 - 1e-9);
    }
}

#[test]
fn fekete_never_beats_the_minimax_value() {
    let k = make_compact(&SetDescriptor::circle(C64::new(3.0, 0.0), 0.2, 0.01)).unwrap();
    let l = make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, 0.02)).unwrap();
    let gamma = make_contour(&k, &[l.clone()], 0.0, 256, None).unwrap();
    let phi = Polynomial::constant(C64::new(1.0, 0.0));
    for &n in &[10usize, 20, 30] {
        let mm = incomplete_fit_minimax(&phi, &k, Some(&l), n, 8.0, &quick()).unwrap();
        let fk = incomplete_fit_fekete(&phi, &k, Some(&l), &gamma, n, 8.0, None, &quick()).unwrap();
        assert!(fk.err() >= mm.lp_value.unwrap() * (1.0 - 1e-9), "n={n}");
    }
}

#[test]
fn decay_curve_is_geometric_away_from_the_origin() {
    let k = make_compact(&SetDescriptor::circle(C64::new(3.0, 0.0), 0.2, 0.01)).unwrap();
    let l = make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, 0.02)).unwrap();
    let phi = Polynomial::constant(C64::new(1.0, 0.0));
    let sched = IncompletenessSchedule::Constant { tau: 16.0 };
    let curve = decay_curve(&phi, &k, Some(&l), &sched, &[10, 20, 30, 40], None, 1.0, &quick()).unwrap();
    assert!(curve.fitted_rate < 0.9, "rate {}", curve.fitted_rate);
    for w in curve.rows.windows(2) {
        assert!(w[1].err_k < w[0].err_k);
    }
}

#[test]
fn standard_precision_escalates_for_large_degrees() {
    assert_eq!(Precision::Standard.resolve(100, 3.0), Precision::Standard);
    assert!(matches!(Precision::Standard.resolve(1000, 3.0), Precision::Extended(b) if b >= 160));
    assert_eq!(Precision::Extended(256).resolve(1000, 3.0), Precision::Extended(256));
}

#[test]
fn schedules_validate_tau() {
    assert!(IncompletenessSchedule::Constant { tau: 1.0 }.tau_at(10).is_err());
    let d = IncompletenessSchedule::Diverging { scale: 2.0, power: 0.5 };
    assert!(d.tau_at(100).unwrap() > d.tau_at(4).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn window_is_respected(n in 2usize..40, tau in 1.05f64..12.0) {
        let v = window_start(n, tau).unwrap();
        prop_assert!(v <= n);
        prop_assert_eq!(v, (n as f64 / tau).floor() as usize);
        let ks = circle(C64::new(1.5, 0.5), 0.7, 48);
        let kv: Vec<C64> = ks.iter().map(|z| z.exp()).collect();
        let opts = FitOptions { skip_monomial: false, ..FitOptions::default() };
        let r = minimax_on_samples(&ks, &kv, &[], n, tau, &opts).unwrap();
        let p = &r.polynomial;
        prop_assert!(p.is_zero() || (p.valuation() >= v as i64 && p.degree() <= n as i64));
    }

    #[test]
    fn window_members_are_reproduced(
        v in 0usize..6,
        extra in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5),
    ) {
        let mut coeffs = vec![C64::new(0.0, 0.0); v];
        coeffs.extend(extra.iter().map(|&(a, b)| C64::new(a, b)));
        let phi = Polynomial::from_coeffs(coeffs.clone());
        let n = coeffs.len() - 1 + 2;
        let tau = if v == 0 { 1e6 } else { n as f64 / v as f64 * (1.0 + 1e-9) };
        prop_assume!(window_start(n, tau).unwrap() == v);
        let ks = circle(C64::new(0.5, 0.2), 1.0, 40);
        let kv: Vec<C64> = ks.iter().map(|&z| phi.eval(z)).collect();
        let r = minimax_on_samples(&ks, &kv, &[], n, tau, &quick()).unwrap();
        prop_assert!(r.err_k < 1e-9, "err {}", r.err_k);
    }

    #[test]
    fn wider_window_never_hurts(n in 6usize..24, split in 0.2f64..0.8) {
        let ks = circle(C64::new(2.0, 0.0), 0.5, 40);
        let kv: Vec<C64> = ks.iter().map(|&z| 1.0 / z).collect();
        let narrow = n as f64 / (n as f64 * split).floor().max(1.0) * (1.0 + 1e-9);
        let wide = 4.0 * narrow;
        let a = minimax_on_samples(&ks, &kv, &[], n, narrow, &quick()).unwrap();
        let b = minimax_on_samples(&ks, &kv, &[], n, wide, &quick()).unwrap();
        let (ta, tb) = (a.lp_value.unwrap_or(0.0), b.lp_value.unwrap_or(0.0));
        prop_assert!(tb <= ta * (1.0 + 1e-8) + 1e-12, "narrow {ta} wide {tb}");
    }

    #[test]
    fn fitted_rate_recovers_geometric_sequences(r in 0.05f64..0.99, c in 0.1f64..10.0) {
        let pts: Vec<(usize, f64)> = (1..12).map(|n| (3 * n, c * r.powi(3 * n as i32))).collect();
        prop_assert!((fitted_rate(&pts).unwrap() - r).abs() < 1e-9 * (1.0 + r));
    }
}
