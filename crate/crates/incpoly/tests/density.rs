use incpoly::density::*;
use proptest::prelude::*;

const H: u64 = 1_000_000;

fn fam(f: WeightFamily) -> WeightSequence {
    WeightSequence::new(f).unwrap()
}

#[test]
fn evens_have_half_natural_density() {
    let d = lower_density(&IndexSet::evens(), &WeightSequence::constant(), H).unwrap();
    assert!((d.estimate - 0.5).abs() < 0.01);
    let u = upper_density(&IndexSet::evens(), &WeightSequence::constant(), H).unwrap();
    assert!((u.estimate - 0.5).abs() < 0.01);
}

#[test]
fn natural_numbers_have_full_density_for_every_weight() {
    for w in [
        WeightSequence::constant(),
        WeightSequence::log(),
        fam(WeightFamily::Power { r: 2.0 }),
        fam(WeightFamily::ExpPower { eps: 1.0 }),
        fam(WeightFamily::SubExp { s: Some(1) }),
    ] {
        let d = lower_density(&IndexSet::Natural, &w, 10_000).unwrap();
        assert!((d.estimate - 1.0).abs() < 1e-12, "{:?}", w.family);
    }
}

#[test]
fn finite_sets_have_zero_upper_density() {
    let e = IndexSet::explicit((1..=20).collect());
    // the tail maximum is attained at horizon/2, where the ratio is 20 / (horizon/2)
    for h in [10_000u64, 100_000, 1_000_000] {
        let u = upper_density(&e, &WeightSequence::constant(), h).unwrap();
        assert!((u.estimate - 40.0 / h as f64).abs() < 1e-15);
    }
}

#[test]
fn sparse_sets_are_rejected_as_horizon_too_small() {
    let e = IndexSet::explicit(vec![3, 50, 900]);
    assert!(matches!(
        lower_density(&e, &WeightSequence::constant(), 1000),
        Err(incpoly::Error::HorizonTooSmall(_))
    ));
}

#[test]
fn log_density_of_evens_carries_the_harmonic_bias() {
    // sum_{2j <= n} 1/(2j) / H_n = H_{n/2} / (2 H_n), whose deficit from 1/2 is about ln 2 / (2 ln n)
    let d = lower_density(&IndexSet::evens(), &WeightSequence::log(), H).unwrap();
    let harmonic = |n: u64| (1..=n).map(|k| 1.0 / k as f64).sum::<f64>();
    let exact_at = |n: u64| harmonic(n / 2) / (2.0 * harmonic(n));
    let n = d.attained_at;
    assert!((d.estimate - exact_at(n)).abs() < 1e-10);
    assert!(0.5 - d.estimate < 0.5 * 2f64.ln() / (H as f64).ln() + 1e-3);
}

#[test]
fn counterexample_separates_fast_weights_from_natural_density() {
    let r = prop34_counterexample(3.0, 2.0, &fam(WeightFamily::ExpPower { eps: 1.0 }), H).unwrap();
    assert!(r.disjoint);
    assert!(r.dlow_alpha < 0.01);
    assert!(r.dlow_natural >= 1.0 / 9.0 - 0.01);
    assert!((r.natural_floor - 1.0 / 9.0).abs() < 1e-15);
    assert!(matches!(r.delta2, Delta2Verdict::Diverging { .. }));
    let c = prop34_counterexample(3.0, 2.0, &WeightSequence::constant(), H).unwrap();
    assert!((c.dlow_alpha - c.dlow_natural).abs() < 1e-12 && c.dlow_alpha > 0.1);
}

#[test]
fn delta2_verdicts() {
    let grid: Vec<u64> = (4..18).map(|j| 1u64 << j).collect();
    let bounded = |w: WeightSequence| matches!(delta2_check(&w, &grid).unwrap().verdict, Delta2Verdict::Bounded { .. });
    assert!(bounded(WeightSequence::constant()));
    assert!(bounded(fam(WeightFamily::Power { r: 2.0 })));
    assert!(!bounded(fam(WeightFamily::ExpPower { eps: 1.0 })));
    assert!(!bounded(fam(WeightFamily::ExpPower { eps: 0.5 })));
}

#[test]
fn delta2_ratio_matches_closed_form_for_squares() {
    // phi(x) = x (x+1) (2x+1) / 6 for alpha_k = k^2
    let phi = |x: f64| x * (x + 1.0) * (2.0 * x + 1.0) / 6.0;
    let grid = [10u64, 100, 1000, 10_000];
    let rep = delta2_check(&fam(WeightFamily::Power { r: 2.0 }), &grid).unwrap();
    for &(x, lr) in &rep.log_ratios {
        let expect = phi(2.0 * x as f64) / phi(x as f64);
        assert!((lr.exp() - expect).abs() < 1e-9 * expect, "x={x}");
    }
    let c = delta2_check(&WeightSequence::constant(), &grid).unwrap();
    assert!(c.log_ratios.iter().all(|&(_, lr)| (lr.exp() - 2.0).abs() < 1e-12));
}

#[test]
fn admissibility_verdicts() {
    assert!(admissible_check(&WeightSequence::constant(), 100_000).unwrap().admissible);
    assert!(admissible_check(&WeightSequence::log(), 100_000).unwrap().admissible);
    let halving = WeightSequence::new(WeightFamily::Custom {
        log_weights: (1..=100_000).map(|k| -(k as f64) * 2f64.ln()).collect(),
    })
    .unwrap();
    let r = admissible_check(&halving, 100_000).unwrap();
    assert!(!r.divergent_sum && !r.admissible);
}

#[test]
fn union_of_shrinking_blocks_has_full_upper_density() {
    let u = shrinking_union_density(4, 2.0, 1, &fam(WeightFamily::ExpPower { eps: 1.0 }), H).unwrap();
    assert!(u.estimate >= 0.99);
}

#[test]
fn scale_chain_holds_on_sample_sets() {
    let sets = [
        IndexSet::BlockUnion { a: 3.0, c: 2.0, parity: Parity::Even },
        IndexSet::BlockUnion { a: 2.0, c: 1.5, parity: Parity::All },
    ];
    let r = scale_comparison(&WeightSequence::log(), &WeightSequence::constant(), &sets, H).unwrap();
    assert!(r.all_hold, "{:?}", r.rows);
    let r = scale_comparison(
        &WeightSequence::constant(),
        &fam(WeightFamily::ExpPower { eps: 1.0 }),
        &sets[..1],
        H,
    )
    .unwrap();
    assert!(r.all_hold);
    assert!(r.rows[0].dlow_beta < 1e-6 && (r.rows[0].dlow_alpha - 0.125).abs() < 0.01);
    assert!(matches!(
        scale_comparison(&WeightSequence::constant(), &WeightSequence::log(), &sets, 10_000),
        Err(incpoly::Error::PreconditionViolated(_))
    ));
}

#[test]
fn family_ordering_on_sample_sets() {
    let chain = [
        fam(WeightFamily::ExpPower { eps: 1.0 }),
        fam(WeightFamily::SubExp { s: Some(1) }),
        fam(WeightFamily::ExpPower { eps: 0.5 }),
        fam(WeightFamily::LogPower { l: 1 }),
        fam(WeightFamily::Power { r: 1.0 }),
        WeightSequence::constant(),
        fam(WeightFamily::Power { r: -0.5 }),
        WeightSequence::log(),
    ];
    for e in [
        IndexSet::BlockUnion { a: 3.0, c: 2.0, parity: Parity::Even },
        IndexSet::BlockUnion { a: 2.0, c: 1.5, parity: Parity::All },
        IndexSet::Modular { modulus: 7, residues: vec![1, 4] },
    ] {
        let d: Vec<f64> = chain.iter().map(|w| lower_density(&e, w, H).unwrap().estimate).collect();
        for w in d.windows(2) {
            assert!(w[0] <= w[1] + CHAIN_TOLERANCE, "{e:?}: {d:?}");
        }
    }
}

fn arb_set() -> impl Strategy<Value = IndexSet> {
    prop_oneof![
        (2u64..9, prop::collection::vec(0u64..9, 1..4)).prop_map(|(m, r)| IndexSet::Modular {
            modulus: m,
            residues: r.into_iter().map(|x| x % m).collect(),
        }),
        (2.0f64..5.0, 1.2f64..2.0).prop_map(|(a, c)| IndexSet::BlockUnion { a, c, parity: Parity::All }),
        prop::collection::vec(any::<bool>(), 64).prop_map(|bits| {
            // periodic pattern with period 64
            let intervals = (0..400u64)
                .flat_map(|blk| {
                    let bits = bits.clone();
                    (0..64u64).filter(move |&i| bits[i as usize]).map(move |i| {
                        let k = blk * 64 + i + 1;
                        (k, k)
                    })
                })
                .collect();
            IndexSet::Intervals { intervals, step: 1 }
        }),
    ]
}

fn arb_weight() -> impl Strategy<Value = WeightSequence> {
    prop_oneof![
        Just(WeightSequence::constant()),
        Just(WeightSequence::log()),
        (-0.9f64..3.0).prop_map(|r| fam(WeightFamily::Power { r })),
        (0.0f64..1.0).prop_map(|eps| fam(WeightFamily::ExpPower { eps })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn densities_are_ordered_in_unit_interval(e in arb_set(), w in arb_weight()) {
        let h = 20_000;
        prop_assume!(e.elements(h).len() >= 10);
        let lo = lower_density(&e, &w, h).unwrap().estimate;
        let up = upper_density(&e, &w, h).unwrap().estimate;
        prop_assert!(0.0 <= lo && lo <= up + 1e-15 && up <= 1.0);
    }

    #[test]
    fn complement_identity(e in arb_set(), w in arb_weight()) {
        let h = 20_000;
        let c = e.complement();
        prop_assume!(e.elements(h).len() >= 10 && c.elements(h).len() >= 10);
        let up = upper_density(&e, &w, h).unwrap().estimate;
        let lo_c = lower_density(&c, &w, h).unwrap().estimate;
        prop_assert!((up + lo_c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_is_monotone_under_inclusion(e in arb_set(), f in arb_set(), w in arb_weight()) {
        let h = 20_000;
        let (ie, iff) = (e.indicator(h), f.indicator(h));
        let union = IndexSet::explicit((1..=h).filter(|&k| ie[k as usize] || iff[k as usize]).collect());
        prop_assume!(e.elements(h).len() >= 10);
        let a = lower_density(&e, &w, h).unwrap().estimate;
        let b = lower_density(&union, &w, h).unwrap().estimate;
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn enumeration_form_matches_matrix_form(e in arb_set(), w in arb_weight()) {
        let h = 5_000;
        let matrix = density_ratios(&e, &w, h);
        for p in enumeration_ratios(&e, &w, h) {
            prop_assert!((p.ratio - matrix[p.n as usize]).abs() < 1e-10, "n = {}", p.n);
        }
    }

    #[test]
    fn membership_agrees_with_enumeration(e in arb_set()) {
        let h = 3_000;
        let elems = e.elements(h);
        prop_assert!(elems.windows(2).all(|p| p[0] < p[1]));
        for k in 1..=h {
            prop_assert_eq!(e.contains(k), elems.binary_search(&k).is_ok());
        }
    }
}
