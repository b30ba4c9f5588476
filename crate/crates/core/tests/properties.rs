use std::f64::consts::E;

use porous_core::cascade::Round;
use porous_core::dimension::max_collection;
use porous_core::*;
use proptest::prelude::*;

fn dyadic(num: i64, exp: u32) -> Dyadic {
    Dyadic::new(num as i128, exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dyadic_arithmetic_is_exact(a in -1_000_000i64..1_000_000, ea in 0u32..30, b in -1_000_000i64..1_000_000, eb in 0u32..30) {
        let (x, y) = (dyadic(a, ea), dyadic(b, eb));
        let (fx, fy) = (x.to_f64(), y.to_f64());
        prop_assert_eq!(x.checked_add(y).unwrap().to_f64(), fx + fy);
        prop_assert_eq!(x.checked_sub(y).unwrap().to_f64(), fx - fy);
        prop_assert_eq!(x.cmp(&y), fx.partial_cmp(&fy).unwrap());
        prop_assert_eq!(Dyadic::from_f64(fx).unwrap(), x);
    }

    #[test]
    fn cube_index_round_trips(k in 1u32..5, digits in proptest::collection::vec(0u64..16, 0..12)) {
        let digits: Vec<u64> = digits.into_iter().map(|d| d % (1 << k)).collect();
        let q = CubeIndex::from_digits(k, 1, digits.clone()).unwrap();
        let parsed: CubeIndex = CubeIndex::parse_with_dim(&q.to_string(), 1).unwrap();
        prop_assert_eq!(&parsed, &q);
        for c in q.child_cubes() {
            prop_assert_eq!(c.parent().unwrap(), q.clone());
            prop_assert!(q.is_ancestor_of(&c));
        }
        let corner = q.lower_corner().unwrap();
        prop_assert_eq!(CubeIndex::containing(k, q.depth(), corner[0]).unwrap(), q);
    }

    #[test]
    fn children_masses_sum_to_parent(log_base in 1.05f64..2.9, digits in proptest::collection::vec(0u64..2, 0..30)) {
        let mu = counterexample_measure(log_base, 40).unwrap();
        let q = CubeIndex::from_digits(1, 1, digits).unwrap();
        let parent = mu.mass_of_cube(&q).unwrap();
        let kids: f64 = q.child_cubes().iter().map(|c| mu.mass_of_cube(c).unwrap()).sum();
        prop_assert!((parent - kids).abs() <= 1e-14 * parent.max(1e-300));
    }

    #[test]
    fn interval_rounding_brackets(lo in 0i128..4096, len in 0i128..4096, bits in 12u32..20) {
        let mu = bernoulli_cascade(0.3, 16).unwrap();
        let scale = 1i128 << (bits - 12);
        let (a, b) = (lo * scale, (lo + len) * scale);
        let outer = mu.interval_mass(a, b, bits, Round::Outer);
        let inner = mu.interval_mass(a, b, bits, Round::Inner);
        prop_assert!(inner <= outer + 1e-15);
        prop_assert!(outer <= 1.0 + 1e-12);
    }

    #[test]
    fn ball_bracket_is_ordered(x in 0.0f64..1.0, s in 1u32..12) {
        let mu = counterexample_measure(E, 30).unwrap();
        let r = (-(s as f64)).exp2();
        let b = mu.mass_of_ball(x, r, 24).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0 + 1e-12);
    }

    #[test]
    fn set_porosity_in_unit_range(x in 0.0f64..1.0, s in 0u32..8) {
        let a = example_set(1, 2, 1, 3).unwrap();
        let v = por_set(&a, x, (-(s as f64)).exp2(), 16).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn measure_porosity_monotone_in_eps(x in 0.0f64..1.0, s in 1u32..8, e1 in 0.001f64..0.5, e2 in 0.001f64..0.5) {
        let mu = bernoulli_cascade(0.25, 24).unwrap();
        let r = (-(s as f64)).exp2();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = por_measure(&mu, x, r, lo, s + 8).unwrap();
        let b = por_measure(&mu, x, r, hi, s + 8).unwrap();
        prop_assert!(a.value <= b.value + 1e-12);
        prop_assert!(a.value <= a.optimistic + 1e-12);
    }

    #[test]
    fn holder_never_fails(masses in proptest::collection::vec(0.0f64..1.0, 1..20), r in 1e-6f64..1.0, d in 0.1f64..3.0, f in 0.01f64..0.99) {
        prop_assert!(holder_step(&masses, r, d * f, d).unwrap().holds);
    }

    #[test]
    fn max_collection_dominates_every_level(values in proptest::collection::vec(0.0f64..1.0, 31), i_min in 0usize..5) {
        let mut terms = Vec::new();
        let mut at = 0;
        for i in 0..5 {
            terms.push(values[at..at + (1 << i)].to_vec());
            at += 1 << i;
        }
        let (best, _) = max_collection(&terms, 2, i_min).unwrap();
        for row in terms.iter().skip(i_min) {
            prop_assert!(best >= row.iter().sum::<f64>() - 1e-12);
        }
    }

    #[test]
    fn k_nondecreasing_in_alpha(a in 0.46875f64..0.4999999, b in 0.46875f64..0.4999999) {
        prop_assume!(a > 15.0 / 32.0 && b > 15.0 / 32.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(constants(1, lo, None).unwrap().k <= constants(1, hi, None).unwrap().k);
    }

    #[test]
    fn survivors_nest(keep in proptest::sample::subsequence(vec![0u64, 1, 2, 3], 1..4), depth in 1usize..6) {
        let a = comb_set(2, &keep, 6).unwrap();
        let parents = a.survivors(depth).unwrap();
        for c in a.survivors(depth + 1).unwrap() {
            prop_assert!(parents.contains(&c.parent().unwrap()));
        }
        prop_assert_eq!(a.survivor_count(depth), Some(keep.len().pow(depth as u32) as u128));
    }

    #[test]
    fn set_mass_nonincreasing(period in 1usize..4, depth in 1usize..30) {
        let mu = counterexample_measure(E, 64).unwrap();
        let e = digit_constraint(period, &[0], 0, 64).unwrap();
        let a = measure_of_set_approx(&mu, &e, depth).unwrap().mass;
        let b = measure_of_set_approx(&mu, &e, depth + 1).unwrap().mass;
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn eta_in_unit_interval(digits in proptest::collection::vec(0u8..2, 0..10)) {
        let ew = EtaWeights::new(1, 2, even_digits_zero(40).unwrap(), E).unwrap();
        let len = digits.len() / 3 * 3;
        let v = ew.eta_digits(&digits[..len]).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
    }
}
