use incpoly::approx::{bound_setup, theorem_c_bound};
use incpoly::freqsets::*;
use incpoly::geometry::*;
use incpoly::potential::Harnack;
use incpoly::uts::*;
use incpoly::xprec::XComplex;
use incpoly::{Error, C64};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn circle(r: f64, count: usize) -> Vec<C64> {
    (0..count).map(|t| C64::from_polar(r, TAU * t as f64 / count as f64)).collect()
}

fn three_points(angle: f64) -> CompactSetSample {
    let pts: Vec<C64> = [0.0, 0.1, -0.1].iter().map(|&t| C64::from_polar(3.0, t + angle)).collect();
    make_compact(&SetDescriptor::points(&pts)).unwrap()
}

struct Toy {
    k: CompactSetSample,
    u: Vec<C64>,
    choice: TauChoice,
    targets: TargetEnumeration,
    family: FrequencyFamily,
    horizon: u64,
}

fn toy() -> Toy {
    let k = three_points(0.0);
    let u = circle(1.5, 256);
    let choice = calibrate_tau(&k, &u, &[16, 32, 48, 64], 0.05).unwrap();
    let targets = enumerate_targets(&u, 3, 7).unwrap();
    let radii: Vec<f64> = targets.targets.iter().map(|t| t.radius).collect();
    let floors = natural_floors(choice.contraction, &radii, choice.n).unwrap();
    let horizon = 20_000;
    let family = build_natural_family(3.0, 1, &floors, 3, 6.05, 1.5, ExponentSchedule::Cyclic, horizon).unwrap();
    Toy {
        k,
        u,
        choice,
        targets,
        family,
        horizon,
    }
}

fn build(t: &Toy) -> UtsState {
    build_futs(&t.k, &t.u, &t.targets, &t.family, &t.choice, t.horizon).unwrap()
}

#[test]
fn toy_construction_verifies_on_every_frequency() {
    let t = toy();
    assert_eq!(t.choice.tau, 2.0);
    assert!(t.choice.contraction < 1.0);
    let state = build(&t);
    let rep = verify_futs(&state, std::slice::from_ref(&t.k), &t.targets, &t.family, t.horizon).unwrap();
    assert!(rep.ok(), "{:?}", rep.violations);
    for c in &rep.targets {
        assert!(c.elements > 0 && c.misses == 0 && c.hits == c.elements, "{c:?}");
        assert!(c.worst_error < t.targets.targets[c.target].radius);
    }
    assert!(rep.late_increment < 1e-3);
    assert!(rep.tail_sum.is_finite());
}

#[test]
fn blocks_respect_windows_and_bounds() {
    let t = toy();
    let state = build(&t);
    let mut prev_set = None;
    let mut prev_deg: Option<u64> = None;
    let mut zero = 0;
    for b in &state.blocks {
        // a block is zero exactly when its set repeats the previous one
        assert_eq!(b.is_zero(), prev_set == Some(b.set), "block {}", b.n);
        prev_set = Some(b.set);
        let Some(w) = &b.window else {
            zero += 1;
            continue;
        };
        let (val, deg) = (w.valuation().unwrap(), w.degree().unwrap());
        assert!(deg <= b.s);
        assert!(val as f64 > b.s as f64 / t.choice.tau);
        if let Some(d) = prev_deg {
            assert!(val > d, "windows of consecutive blocks overlap at {}", b.n);
        }
        prev_deg = Some(deg);
        let bound = b.log_bound.unwrap();
        assert!(b.log_norm_l.unwrap() <= bound && b.log_err_k.map_or(true, |e| e <= bound));
    }
    assert!(zero > 0);
    assert!(state.nonzero_blocks().count() >= 3);
}

#[test]
fn construction_is_deterministic_and_roundtrips() {
    let t = toy();
    let a = build(&t);
    let b = build(&t);
    let text = a.to_json().unwrap();
    assert_eq!(text, b.to_json().unwrap());
    assert_eq!(a.config_hash.len(), 64);
    let back = UtsState::from_json(&text).unwrap();
    assert_eq!(back.to_json().unwrap(), text);
    let z = XComplex::from_c64(C64::new(2.5, 0.7), a.bits);
    for l in [40u64, 300, 5000, 20_000] {
        let (x, y) = (a.partial_sum(l, &z), back.partial_sum(l, &z));
        assert_eq!(x.sub(&y, a.bits).is_zero(), true, "l = {l}");
    }
    let dir = std::env::temp_dir().join(format!("incpoly-uts-{}.json", std::process::id()));
    a.save(&dir).unwrap();
    let loaded = UtsState::load(&dir).unwrap();
    std::fs::remove_file(&dir).ok();
    assert_eq!(loaded.to_json().unwrap(), text);
}

#[test]
fn rotating_the_compact_and_targets_rotates_the_errors() {
    let t = toy();
    let alpha = 0.9;
    let k_rot = three_points(alpha);
    let targets_rot = TargetEnumeration {
        targets: t.targets.targets.iter().map(|p| p.rotated(alpha, &t.u)).collect(),
        seed: t.targets.seed,
    };
    let a = build(&t);
    let b = build_futs(&k_rot, &t.u, &targets_rot, &t.family, &t.choice, t.horizon).unwrap();
    for (p, (phi, phi_rot)) in t.targets.targets.iter().zip(&targets_rot.targets).enumerate() {
        for l in [1u64, 37, 45, 60, 222, 300, 1340, 2000, 8106, 19_999] {
            let e = partial_sum_error(&a, l, &t.k, &phi.polynomial());
            let f = partial_sum_error(&b, l, &k_rot, &phi_rot.polynomial());
            assert!((e - f).abs() < 1e-9, "p = {p}, l = {l}: {e} vs {f}");
        }
    }
}

#[test]
fn single_compact_multi_construction_is_the_plain_one() {
    let t = toy();
    let multi = build_multi_futs(std::slice::from_ref(&t.k), &t.u, &t.targets, &t.family, &t.choice, t.horizon).unwrap();
    assert_eq!(multi.to_json().unwrap(), build(&t).to_json().unwrap());
}

#[test]
fn two_compacts_share_one_series() {
    let t = toy();
    let ks = [three_points(0.0), three_points(PI)];
    let targets = enumerate_targets(&t.u, 2, 11).unwrap();
    // set p serves compact p mod 2 and target p div 2
    let radii: Vec<f64> = (0..4).map(|p| targets.targets[p / 2].radius).collect();
    let floors = natural_floors(t.choice.contraction, &radii, t.choice.n).unwrap();
    let horizon = 80_000;
    let family = build_natural_family(3.0, 1, &floors, 4, 6.05, 1.5, ExponentSchedule::Cyclic, horizon).unwrap();
    let state = build_multi_futs(&ks, &t.u, &targets, &family, &t.choice, horizon).unwrap();
    let rep = verify_futs(&state, &ks, &targets, &family, horizon).unwrap();
    assert!(rep.ok(), "{:?}", rep.violations);
    assert_eq!(rep.targets.len(), 4);
    let compacts: Vec<usize> = state.nonzero_blocks().map(|b| b.compact).collect();
    assert!(compacts.contains(&0) && compacts.contains(&1));
}

#[test]
fn separation_below_tau_plus_one_is_rejected() {
    let t = toy();
    let mut choice = t.choice.clone();
    choice.tau = 4.0;
    assert!(matches!(
        build_futs(&t.k, &t.u, &t.targets, &t.family, &choice, t.horizon),
        Err(Error::PreconditionViolated(_))
    ));
}

#[test]
fn understated_constants_are_caught_as_violations() {
    let t = toy();
    let mut choice = t.choice.clone();
    choice.theta = 1e-3;
    choice.contraction = 1e-3;
    match build_futs(&t.k, &t.u, &t.targets, &t.family, &choice, t.horizon) {
        Err(Error::ConstraintViolation { which, .. }) => assert!(which == 'b' || which == 'c'),
        other => panic!("expected a constraint violation, got {other:?}"),
    }
}

#[test]
fn targets_are_bounded_and_reproducible() {
    let u = circle(1.5, 256);
    let e = enumerate_targets(&u, 12, 3).unwrap();
    assert_eq!(e.targets.len(), 12);
    assert!(e.targets[0].coeffs.is_empty());
    e.check_norms(&u).unwrap();
    for (p, t) in e.targets.iter().enumerate() {
        assert_eq!(t.radius, target_radius(p));
        for c in &t.coeffs {
            let (re, im) = (c.re * 8.0, c.im * 8.0);
            assert!(re == re.round() && im == im.round());
        }
    }
    let labels = |e: &TargetEnumeration| e.targets.iter().map(|t| t.label.clone()).collect::<Vec<_>>();
    assert_eq!(labels(&e), labels(&enumerate_targets(&u, 12, 3).unwrap()));
    let mut seen = labels(&e);
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 12);
}

#[test]
fn lattice_compacts_exhaust_the_exterior() {
    let disc = make_compact(&SetDescriptor {
        kind: "disc".into(),
        params: serde_json::json!({"center": [2.0, 0.0], "radius": 0.3, "interior_grid": 0.1}),
        resolution: Some(0.015),
    })
    .unwrap();
    let mut embedded = None;
    for i in 0..=50 {
        let (h, cells) = nestoridis_cells(i);
        assert!(!cells.is_empty());
        let k = nestoridis_family(i);
        assert!(k.min_radius >= 1.0 + h - 1e-12, "i = {i}");
        assert!(lattice_complement_connected(&cells), "i = {i}");
        if i < 8 {
            assert!(connected_complement_check(&k, h / 4.0), "i = {i}");
        }
        if embedded.is_none() && i <= 20 && embeds_in(&k, &disc) {
            embedded = Some(i);
        }
    }
    assert!(embedded.is_some());
}

#[test]
fn closed_rings_are_not_simply_connected() {
    // the full annulus of cells has a bounded complementary component
    let cells: Vec<(i64, i64)> = (-3i64..3)
        .flat_map(|a| (-3i64..3).map(move |b| (a, b)))
        .filter(|&(a, b)| !(-1..1).contains(&a) || !(-1..1).contains(&b))
        .collect();
    assert!(!lattice_complement_connected(&cells));
    let slit: Vec<(i64, i64)> = cells.iter().copied().filter(|&(a, b)| !(a >= 0 && b == 0)).collect();
    assert!(lattice_complement_connected(&slit));
}

#[test]
fn log_construction_meets_its_block_bounds() {
    let k = three_points(0.0);
    let u = circle(0.8, 256);
    let c = calibrate_log(&k, &u, &[16, 32, 48, 64]).unwrap();
    assert!(c.theta < 1.0 && (c.g - 1.6).abs() < 1e-12);
    let targets = enumerate_targets(&u, 2, 7).unwrap();
    let floors = log_floors(std::slice::from_ref(&c), &targets, std::slice::from_ref(&u), 2).unwrap();
    let family = build_log_family(1.6, 0.1, &floors, 2, 1, ExponentSchedule::Cyclic, 30).unwrap();
    let horizon = 400_000;
    let exhaustion = Exhaustion { repeat: 1 };
    let state = build_log_futs(&[k.clone()], &[u.clone()], &[c], exhaustion, &targets, &family, horizon).unwrap();
    let rep = verify_futs(&state, &[k], &targets, &family, horizon).unwrap();
    assert!(rep.ok(), "{:?}", rep.violations);
    for b in state.nonzero_blocks() {
        let w = b.window.as_ref().unwrap();
        let val = w.valuation().unwrap();
        assert!(val * val >= b.s);
        let r = targets.targets[b.target].radius;
        assert!(b.log_norm_l.unwrap() <= r.ln() - 2.0 * (b.s as f64).ln());
        assert!(b.l_radius < 1.0);
    }
}

#[test]
fn tau_choice_from_the_bound() {
    let k = make_compact(&SetDescriptor::circle(C64::new(3.0, 0.0), 0.2, TAU * 0.2 / 256.0)).unwrap();
    let l = make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, TAU / 512.0)).unwrap();
    let gamma = make_contour(&k, &[l.clone()], 0.0, 512, None).unwrap();
    let setup = bound_setup(&k, Some(&l), &gamma, 40, Harnack::Bound(10.0), 128).unwrap();
    let u = l.all_samples();
    let c = choose_tau(&setup, &u, 0.05).unwrap();
    assert!(c.contraction < 0.95);
    assert_eq!(c.source, ConstantSource::Bound);
    for n in [c.n, 2 * c.n, 16 * c.n] {
        assert!(theorem_c_bound(&setup, n as usize, c.tau, 1.0).unwrap().root <= c.theta);
    }
    assert!(theorem_c_bound(&setup, c.n as usize - 1, c.tau, 1.0).unwrap().root > c.theta);
    assert!(matches!(choose_tau(&setup, &u, 1.5), Err(Error::InvalidArgument(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn truncated_window_sums_match_the_full_sum(
        v in 0u64..40,
        coeffs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..6),
        re in -1.5f64..1.5, im in -1.5f64..1.5,
    ) {
        let bits = 192;
        let w = Window { v, coeffs: coeffs.iter().map(|&(a, b)| XComplex::from_c64(C64::new(a, b), bits)).collect() };
        let z = XComplex::from_c64(C64::new(re, im), bits);
        let top = v + coeffs.len() as u64 - 1;
        prop_assert!(w.eval_upto(&z, top, bits).sub(&w.eval(&z, bits), bits).is_zero());
        let zc = C64::new(re, im);
        let direct: C64 = coeffs.iter().enumerate().take(2).map(|(k, &(a, b))| C64::new(a, b) * zc.powu((v + k as u64) as u32)).sum();
        let got = w.eval_upto(&z, v + 1, bits).to_c64();
        prop_assert!((got - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
        let back: Window = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        prop_assert!(back.eval(&z, bits).sub(&w.eval(&z, bits), bits).is_zero());
    }

    #[test]
    fn interpolating_blocks_reproduce_the_residual(
        pts in prop::collection::btree_set((0u32..64, 0u32..8), 1..6),
        s in 20u64..200,
    ) {
        let k: Vec<C64> = pts.iter().map(|&(a, r)| C64::from_polar(1.5 + 0.25 * r as f64, TAU * a as f64 / 64.0)).collect();
        let bits = 256;
        let vals: Vec<XComplex> = k.iter().map(|&z| XComplex::from_c64(C64::new(1.0, 0.0) / z, bits)).collect();
        let fit = fit_block(&k, &vals, 1, s, 1.0, bits, None).unwrap();
        prop_assert_eq!(fit.method, BlockMethod::Interpolation);
        prop_assert!(fit.log_err_k.map_or(true, |e| e < -100.0));
        prop_assert!(fit.window.degree().unwrap() <= s);
    }

    #[test]
    fn floors_keep_the_geometric_tail_below_the_radius(q in 0.05f64..0.95, n_min in 1u64..50) {
        let radii = [0.5, 0.25, 0.125, 0.5];
        let f = natural_floors(q, &radii, n_min).unwrap();
        prop_assert!(f.windows(2).all(|w| w[0] < w[1]) && f[0] >= n_min);
        for (&n, &r) in f.iter().zip(&radii) {
            for m in n..n + 500 {
                prop_assert!((m as f64).ln() + m as f64 * q.ln() < r.min(0.5).ln());
            }
        }
    }
}
