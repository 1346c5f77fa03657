use incpoly::density::WeightSequence;
use incpoly::freqsets::*;
use num_bigint::BigUint;
use proptest::prelude::*;

fn natural(schedule: ExponentSchedule) -> FrequencyFamily {
    build_natural_family(3.0, 2, &[1, 10, 100], 3, 6.05, 1.5, schedule, 10_000_000).unwrap()
}

#[test]
fn cyclic_natural_family_is_separated_with_positive_density() {
    let f = natural(ExponentSchedule::Cyclic);
    let r = verify_family(&f, &WeightSequence::constant(), 1_000_000);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert!(r.complete);
    for s in &r.sets {
        let d = s.density.expect("enough elements");
        assert!(d > 0.001, "set {} density {d}", s.p);
    }
    println!("{:?}", r.densities());
}

#[test]
fn dyadic_natural_family_is_separated() {
    let f = natural(ExponentSchedule::Dyadic);
    let r = verify_family(&f, &WeightSequence::constant(), 1_000_000);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
}

#[test]
fn infeasible_natural_parameters_are_rejected() {
    // (kappa + 1) C = 6 is not below a = 6
    let e = build_natural_family(3.0, 2, &[1, 1], 2, 6.0, 1.5, ExponentSchedule::Cyclic, 1000);
    assert!(matches!(e, Err(incpoly::Error::ParameterInfeasible(_))));
}

#[test]
fn log_family_first_blocks() {
    let floors = vec![vec![1u64, 1], vec![1, 1]];
    let f = build_log_family(2.0, 0.1, &floors, 2, 2, ExponentSchedule::Cyclic, 4000).unwrap();
    let skipped = build_log_family(2.0, 0.1, &[vec![2u64]], 1, 1, ExponentSchedule::Cyclic, 100).unwrap();
    assert!(skipped.sets[0].blocks.iter().all(|b| b.u > 0));
    // 2^{1.1} = 2.14 exceeds 2 N = 2, so u = 0 contributes {2}
    let first: Vec<(u32, String, String)> = f
        .sets
        .iter()
        .flat_map(|s| s.blocks.iter())
        .filter(|b| b.u <= 2)
        .map(|b| (b.u, b.first.to_string(), b.last.to_string()))
        .collect();
    assert_eq!(
        first,
        vec![(0, "2".into(), "2".into()), (1, "13".into(), "21".into()), (2, "21619".into(), "198668".into())]
    );
    let r = verify_family(&f, &WeightSequence::log(), 1_000_000);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert!(r.complete);
}

#[test]
fn log_family_blocks_respect_divisors_and_floors() {
    let floors = vec![vec![3u64, 5], vec![7, 11]];
    let f = build_log_family(2.0, 0.15, &floors, 2, 2, ExponentSchedule::Dyadic, 20_000).unwrap();
    let r = verify_family(&f, &WeightSequence::log(), 100_000);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    for s in &f.sets {
        assert_eq!(s.divisor, BigUint::from(floors[s.i][s.p]));
        for b in &s.blocks {
            // exact census: number of multiples of N in the block
            let n = &s.divisor;
            assert_eq!(b.count(), &b.last / n - (&b.first - 1u32) / n);
            assert!(b.first >= BigUint::from(2 * floors[s.i][s.p]));
        }
    }
    let json = serde_json::to_string(&f).unwrap();
    let back: FrequencyFamily = serde_json::from_str(&json).unwrap();
    assert_eq!(back, f);
}

#[test]
fn log_family_rejects_bad_parameters() {
    let floors = vec![vec![1u64]];
    for (a, eps) in [(2.0, 0.2), (1.4, 0.1), (2.0, 0.0)] {
        assert!(matches!(
            build_log_family(a, eps, &floors, 1, 1, ExponentSchedule::Cyclic, 100),
            Err(incpoly::Error::ParameterInfeasible(_))
        ));
    }
}

#[test]
fn moved_element_is_reported_with_a_witness() {
    let mut f = natural(ExponentSchedule::Cyclic);
    // put a single element of set 1 right above the first block of set 0
    let top = f.sets[0].blocks[1].last.clone();
    let intruder = &top + 2u32;
    f.sets[1].blocks.push(Block {
        u: 99,
        first: intruder.clone(),
        last: intruder.clone(),
        step: BigUint::from(2u32),
    });
    let r = verify_family(&f, &WeightSequence::constant(), 100_000);
    let hit = r.violations.iter().any(|v| {
        matches!(v, Violation::Separation { sets, n, m } if sets[0] == (1, 0) && sets[1] == (0, 0) && *n == intruder && *m == top)
    });
    assert!(hit, "{:?}", r.violations);
}

#[test]
fn shared_element_is_reported_as_overlap() {
    let mut f = natural(ExponentSchedule::Cyclic);
    let b = f.sets[0].blocks[1].clone();
    f.sets[2].blocks.push(Block { u: 99, ..b.clone() });
    let r = verify_family(&f, &WeightSequence::constant(), 100_000);
    assert!(r.violations.iter().any(|v| matches!(v, Violation::Overlap { element, .. } if *element == b.first)));
}

#[test]
fn floor_and_divisor_breaches_are_reported() {
    let mut f = natural(ExponentSchedule::Cyclic);
    f.sets[2].blocks[0].first = BigUint::from(51u32);
    f.sets[2].blocks[0].last = BigUint::from(51u32);
    let r = verify_family(&f, &WeightSequence::constant(), 100_000);
    assert!(r.violations.iter().any(|v| matches!(v, Violation::Divisibility { set: (2, 0), .. })));
    assert!(r.violations.iter().any(|v| matches!(v, Violation::Floor { set: (2, 0), .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn feasible_natural_families_verify(
        kappa in 1.5f64..4.0,
        c in 1.1f64..2.0,
        slack in 1.01f64..1.5,
        nu in 1u64..6,
        count in 1usize..5,
        dyadic in any::<bool>(),
    ) {
        let a = (kappa + 1.0) * c * slack;
        let schedule = if dyadic { ExponentSchedule::Dyadic } else { ExponentSchedule::Cyclic };
        let floors: Vec<u64> = (0..count as u64).map(|p| 1 + 7 * p).collect();
        let f = build_natural_family(kappa, nu, &floors, count, a, c, schedule, 1_000_000_000).unwrap();
        let r = verify_family(&f, &WeightSequence::constant(), 10_000);
        prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
        for s in &f.sets {
            for b in &s.blocks {
                let (lo, hi) = (b.first.to_string().parse::<f64>().unwrap(), b.last.to_string().parse::<f64>().unwrap());
                let base = a.powi(b.u as i32);
                prop_assert!(lo >= base && hi <= c * base + 1e-6 * base);
            }
        }
    }

    #[test]
    fn ratio_separation_matches_float_away_from_ties(m in 1u64..1_000_000, n in 1u64..10_000_000, kappa in 1.0f64..10.0) {
        let exact = Separation::Ratio { kappa }.separated(&n.into(), &m.into());
        let x = n as f64 - kappa * m as f64;
        prop_assume!(x.abs() > 1e-6 * n as f64);
        prop_assert_eq!(exact, x > 0.0);
    }
}
