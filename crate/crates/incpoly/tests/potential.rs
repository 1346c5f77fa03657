use incpoly::geometry::*;
use incpoly::potential::*;
use incpoly::C64;
use proptest::prelude::*;
use std::f64::consts::TAU;

fn point() -> impl Strategy<Value = C64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y)| C64::new(x, y))
}

fn finite_set(max: usize) -> impl Strategy<Value = CompactSetSample> {
    prop::collection::vec(point(), 3..=max).prop_filter_map("distinct points", |pts| {
        let distinct = pts.iter().enumerate().all(|(i, a)| pts[..i].iter().all(|b| (a - b).norm() > 1e-3));
        distinct.then(|| make_compact(&SetDescriptor::points(&pts)).unwrap())
    })
}

fn disc_or_segment() -> impl Strategy<Value = CompactSetSample> {
    (point(), 0.1f64..0.8, 0.0f64..TAU, any::<bool>()).prop_map(|(z, r, t, circle)| {
        let desc = if circle {
            SetDescriptor::circle(z, r, 0.1)
        } else {
            SetDescriptor::segment(z, z + C64::from_polar(2.0 * r, t), 0.1)
        };
        make_compact(&desc).unwrap()
    })
}

/// `g(z, inf)` for the segment `[a, b]`: `log |w + sqrt(w - 1) sqrt(w + 1)|`
/// with `w` the image of `z` under the affine map sending `[a, b]` to `[-1, 1]`.
fn segment_green(a: C64, b: C64, z: C64) -> f64 {
    let w = (2.0 * z - a - b) / (b - a);
    (w + (w - 1.0).sqrt() * (w + 1.0).sqrt()).norm().ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_diameters_do_not_increase(k in finite_set(9)) {
        let mut prev = f64::INFINITY;
        for n in 2..=k.len().min(7) {
            let d = fekete_tuple(&k, n, FeketeMode::Exact).unwrap().delta_n;
            prop_assert!(d <= prev * (1.0 + 1e-9), "n = {n}: {d} > {prev}");
            prev = d;
        }
    }

    #[test]
    fn greedy_tuples_stay_close_to_exact(k in finite_set(12), n in 2usize..6) {
        prop_assume!(n <= k.len());
        let exact = fekete_tuple(&k, n, FeketeMode::Exact).unwrap().delta_n;
        let greedy = fekete_tuple(&k, n, FeketeMode::Greedy).unwrap().delta_n;
        prop_assert!(greedy <= exact * (1.0 + 1e-12));
        prop_assert!(greedy >= 0.95 * exact, "greedy {greedy} exact {exact}");
    }

    #[test]
    fn dilation_capacity_ratio_is_at_most_two(k in disc_or_segment(), e2 in 0.1f64..0.5, factor in 1.5f64..4.0) {
        let e1 = e2 * factor;
        let c1 = capacity(&dilate_with(&k, e1, 0.1).unwrap(), 24).unwrap().capacity;
        let c2 = capacity(&dilate_with(&k, e2, 0.05).unwrap(), 24).unwrap().capacity;
        prop_assert!(c1 <= 2.0 * e1 / e2 * c2 * 1.05, "c1 = {c1}, c2 = {c2}");
    }

    #[test]
    fn root_set_diameters_stay_near_capacity(k in finite_set(4), n in 4usize..16) {
        let eps = 1.0 / n as f64;
        let kn = dilate_with(&k, eps, TAU * eps / 64.0).unwrap();
        let d = fekete_tuple(&kn, n, FeketeMode::Greedy).unwrap().delta_n;
        let c = capacity(&kn, 32).unwrap().capacity;
        prop_assert!(d / c <= 2.2, "delta/c = {}", d / c);
    }

    #[test]
    fn dilations_compose(k in disc_or_segment(), a in 0.1f64..0.4, b in 0.1f64..0.4) {
        let res = 0.02;
        let twice = dilate_with(&dilate_with(&k, a, res).unwrap(), b, res).unwrap();
        let once = dilate_with(&k, a + b, res).unwrap();
        // compare outer boundaries: both clouds may also carry inner rings
        let reach = |z: C64| k.dist(z);
        let outer = |s: &CompactSetSample, r: f64| -> Vec<C64> {
            s.all_samples().into_iter().filter(|&z| reach(z) >= r - 0.05).collect()
        };
        let h = hausdorff(&outer(&twice, a + b), &outer(&once, a + b));
        prop_assert!(h <= 2.0 * k.resolution.max(twice.resolution).max(once.resolution).max(res), "hausdorff {h}");
    }

    #[test]
    fn circle_quadrature_integrates_exactly(center in point(), r in 0.1f64..3.0, w in point()) {
        prop_assume!(((w - center).norm() - r).abs() > 0.05 * r);
        let gamma = ContourQuadrature::circle(center, r, 512);
        prop_assert!(gamma.integrate(|_| C64::new(1.0, 0.0)).norm() <= 1e-12 * gamma.length);
        let inside = (w - center).norm() < r;
        let loop_integral = gamma.integrate(|z| 1.0 / (z - w));
        let expect = if inside { C64::new(0.0, TAU) } else { C64::new(0.0, 0.0) };
        prop_assert!((loop_integral - expect).norm() <= 1e-8, "{loop_integral} vs {expect}");
    }

    #[test]
    fn green_estimates_match_closed_forms(center in point(), r in 0.2f64..1.0, t in 0.0f64..TAU, far in 1.5f64..3.0) {
        let disc = make_compact(&SetDescriptor::circle(center, r, TAU * r / 512.0)).unwrap();
        let z = center + C64::from_polar(r * far, t);
        let g = green_estimate(&disc, z, 64).unwrap();
        prop_assert!((g - far.ln()).abs() <= 0.05 * far.ln(), "disc: {g} vs {}", far.ln());
        let (a, b) = (center, center + C64::from_polar(2.0 * r, t));
        let seg = make_compact(&SetDescriptor::segment(a, b, r / 256.0)).unwrap();
        let w = 0.5 * (a + b) + C64::from_polar(r * far, t + 1.0);
        let exact = segment_green(a, b, w);
        let g = green_estimate(&seg, w, 64).unwrap();
        prop_assert!((g - exact).abs() <= 0.05 * exact, "segment: {g} vs {exact}");
    }
}

#[test]
fn theta_on_the_unit_circle_follows_the_roots_of_unity() {
    let k = make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, TAU / 720.0)).unwrap();
    let gamma = ContourQuadrature::circle(C64::new(0.0, 0.0), 2.0, 256);
    let table = theta_sequence(&k, &gamma, 12, Harnack::Bound(3.0)).unwrap();
    for &(m, _, theta) in &table.rows {
        if m < 2 {
            continue;
        }
        let expect = (m as f64).powf(3.0 / (m as f64 - 1.0));
        assert!((theta - expect).abs() < 1e-2 * expect, "m = {m}: {theta} vs {expect}");
    }
}

#[test]
fn polar_sets_report_zero_capacity() {
    let k = make_compact(&SetDescriptor::points(&[C64::new(0.0, 0.0), C64::new(1.0, 1.0)])).unwrap();
    let r = capacity(&k, 10).unwrap();
    assert!(r.polar);
    assert_eq!(r.capacity, 0.0);
}
