//! Independent oracles for derived values.

use std::collections::BTreeSet;
use std::f64::consts::E;

use porous_core::counterexample::c_bound;
use porous_core::dimension::{collection_sum, dimension_certificate_tree, pairwise_disjoint};
use porous_core::porosity::WitnessRule;
use porous_core::theorem::{alpha_for_k, ClaimParams};
use porous_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest gap of the survivor union inside `[x - r, x + r]`, scanning every cell.
fn brute_gap(a: &DyadicSet, x: f64, r: f64, bits: u32) -> f64 {
    let cell = (-(bits as f64)).exp2();
    let (lo, hi) = (x - r, x + r);
    let mut occupied = Vec::new();
    for c in 0..1u64 << bits {
        let (c0, c1) = (c as f64 * cell, (c + 1) as f64 * cell);
        if c1 < lo || c0 > hi {
            continue;
        }
        let q = CubeIndex::from_index(1, bits as usize, c).unwrap();
        if a.contains_cube(&q).unwrap() {
            occupied.push((c0.max(lo), c1.min(hi)));
        }
    }
    let mut best = 0.0f64;
    let mut cursor = lo;
    for (s, e) in occupied {
        best = best.max(s - cursor);
        cursor = cursor.max(e);
    }
    best.max(hi - cursor)
}

#[test]
fn por_set_matches_exhaustive_scan() {
    let sets = [
        comb_set(2, &[0, 3], 6).unwrap(),
        example_set(1, 2, 1, 2).unwrap(),
        even_digits_zero(12).unwrap(),
        digit_constraint(3, &[1, 2], 1, 12).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for a in &sets {
        for _ in 0..150 {
            let bits = rng.random_range(6..=12u32);
            let x = rng.random_range(0..1u64 << 14) as f64 / (1u64 << 14) as f64;
            let s = rng.random_range(0..=bits as i32 - 3);
            let r = (-(s as f64)).exp2();
            let got = por_set(a, x, r, bits).unwrap();
            let want = (brute_gap(a, x, r, bits) / 2.0 / r).min(1.0);
            assert!((got - want).abs() < 1e-12, "x={x} r={r} bits={bits}: {got} vs {want}");
        }
    }
}

/// Left endpoints (in units of 2^-bits) of the Cantor-type construction, built from its maps.
fn example_by_maps(m: u64, k: u64, n: u64, l_max: u64) -> (u32, BTreeSet<u64>) {
    let nk = n * k;
    let mut intervals: Vec<(u64, u32)> = vec![(0, 0)];
    for l in 1..=l_max {
        for _ in 0..m * n * l {
            let mut next = Vec::new();
            for &(left, depth) in &intervals {
                let d = depth + nk as u32;
                next.push((left << nk, d));
                next.push(((left << nk) + (1u64 << nk) - 1, d));
            }
            intervals = next;
        }
        let f = ((nk - m * n) * nk * l) as u32;
        let mut next = Vec::new();
        for &(left, depth) in &intervals {
            for i in 0..1u64 << (f - 1) {
                next.push(((left << f) + 2 * i, depth + f));
            }
        }
        intervals = next;
    }
    let bits = intervals[0].1;
    (bits, intervals.into_iter().map(|(l, _)| l).collect())
}

#[test]
fn example_set_matches_map_construction() {
    for (m, k, n, l_max) in [(1u32, 2u32, 1u32, 2u32), (1, 3, 1, 1), (2, 3, 1, 1), (1, 2, 2, 1)] {
        let e = example_set(m, k, n, l_max).unwrap();
        let (bits, want) = example_by_maps(m as u64, k as u64, n as u64, l_max as u64);
        assert_eq!(bits as usize, e.build_bits());
        let got: BTreeSet<u64> = e.cells_in_window(bits, 0, 1u64 << bits).unwrap().into_iter().collect();
        assert_eq!(got, want, "(m,k,n,l)=({m},{k},{n},{l_max})");
        assert_eq!(e.survivor_count_bits(bits as usize), Some(want.len() as u128));
    }
}

#[test]
fn hausdorff_dimension_formula_of_example() {
    // Block l has 2^{mnl} two-ends choices and 2^{(nk-mn)nkl-1} interval choices.
    let (m, k, n) = (1u64, 2u64, 1u64);
    let e = example_set(1, 2, 1, 6).unwrap();
    let bits = e.build_bits();
    let mut log2_count = 0.0;
    for l in 1..=6u64 {
        log2_count += (m * n * l) as f64 + ((n * k - m * n) * n * k * l - 1) as f64;
    }
    assert!((e.log2_survivor_count_bits(bits) - log2_count).abs() < 1e-9);
    let limit = 1.0 - m as f64 / k as f64 + m as f64 / (n * k * k) as f64;
    // Per block the deficit is one bit, so the ratio after block L is limit - L / (2L(L+1)).
    assert!((log2_count / bits as f64 - (limit - 1.0 / 14.0)).abs() < 1e-12);
}

#[test]
fn measure_porosity_of_comb_is_set_porosity() {
    let k = 2;
    let mu = comb_measure(k, vec![0, 3], 12).unwrap();
    let a = comb_set(k, &[0, 3], 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let digits: Vec<u64> = (0..6).map(|_| if rng.random_bool(0.5) { 0 } else { 3 }).collect();
        let x = digits.iter().enumerate().map(|(i, &d)| d as f64 * 4f64.powi(-(i as i32 + 1))).sum::<f64>() + 4f64.powi(-7);
        for s in 1..=6 {
            let r = (-(s as f64)).exp2();
            let set = por_set(&a, x, r, 12).unwrap();
            let p = por_measure(&mu, x, r, 1e-12, 12).unwrap();
            assert!(p.value <= set + 1e-12, "x={x} r={r}");
            assert!(p.value >= set - p.slack - 1e-12, "x={x} r={r}: {} vs {set}", p.value);
        }
    }
}

#[test]
fn cube_masses_are_digit_products() {
    let mu = counterexample_measure(E, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let depth = rng.random_range(1..=20);
        let digits: Vec<u64> = (0..depth).map(|_| rng.random_range(0..2)).collect();
        let want: f64 = digits
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let w = 1.0 / ((i + 3) as f64).ln();
                let s = if (i + 1) % 2 == 1 { w } else { 1.0 - w };
                if d == 0 { s } else { 1.0 - s }
            })
            .product();
        let q = CubeIndex::from_digits(1, 1, digits).unwrap();
        assert!((mu.mass_of_cube(&q).unwrap() - want).abs() <= 1e-14 * want.max(1e-300));
    }
}

/// Best antichain sum below depth `i_min` by recursion over every split choice.
fn brute_certificate(mu: &CascadeMeasure, d: f64, tau: &TauRule, q: &CubeIndex, i_min: usize, limit: usize) -> f64 {
    let own = if q.depth() >= i_min { collection_sum(mu, d, tau, std::slice::from_ref(q)).unwrap() } else { 0.0 };
    if q.depth() == limit {
        return own;
    }
    let split: f64 = q.child_cubes().iter().map(|c| brute_certificate(mu, d, tau, c, i_min, limit)).sum();
    own.max(split)
}

#[test]
fn certificates_match_recursive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let levels: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let a: f64 = rng.random_range(0.05..0.95);
                vec![a, 1.0 - a]
            })
            .collect();
        let mu = CascadeMeasure::new(1, WeightRule::Custom { levels }, 8, false).unwrap();
        let d = rng.random_range(0.3..1.5);
        let tau = TauRule::Constant { tau: d * rng.random_range(0.2..0.8) };
        let i_min = rng.random_range(1..=3);
        let fast = dimension_certificate(&mu, d, &tau, i_min, 8).unwrap();
        let tree = dimension_certificate_tree(&mu, d, &tau, i_min, 8).unwrap();
        let want = brute_certificate(&mu, d, &tau, &CubeIndex::root(1, 1).unwrap(), i_min, 8);
        assert!((fast.max_sum - want).abs() <= 1e-12 * want);
        assert!((tree.max_sum - want).abs() <= 1e-12 * want);
        assert_eq!(fast.verdict, tree.verdict);
        let cubes = tree.witness_cubes(&mu).unwrap();
        assert!(pairwise_disjoint(&cubes));
        assert!((collection_sum(&mu, d, &tau, &cubes).unwrap() - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn lebesgue_certificate_cli_example() {
    let mu = lebesgue(30).unwrap();
    let v = dimension_certificate(&mu, 0.9, &TauRule::Constant { tau: 0.45 }, 1, 30).unwrap();
    assert_eq!(v.verdict, Verdict::RefutedAtDepth);
    assert!((v.full_cover_sum - (30.0 * 0.05f64).exp2()).abs() < 1e-9);
}

#[test]
fn claim1_all_plain_closed_form() {
    let mu = lebesgue(64).unwrap();
    for (k, n) in [(4u32, 2u32), (6, 2), (6, 3)] {
        let tc = constants(1, alpha_for_k(k), None).unwrap();
        let big_d = 0.8;
        let eps = epsilon0(&tc, big_d, n).unwrap().eps0 / 2.0;
        let cp = ClaimParams { big_d, n, eps, guard: 8, witness: WitnessRule::Centre };
        let q = CubeIndex::from_index(k, 1, 3).unwrap();
        let r = verify_claim1(&mu, &q, &tc, &cp).unwrap();
        assert!(r.porous_by_level.iter().all(|&(_, p, _)| p == 0));
        let leaf = (k * (1 + n)) as f64;
        let want = (k as f64 * n as f64).exp2()
            * tc.beta_plain(big_d).powi(n as i32)
            * (-leaf * (big_d + 1.0) / 2.0).exp2();
        assert!((r.lhs - want).abs() <= 1e-12 * want, "{} vs {want}", r.lhs);
        let rhs = tc.claim_factor() * (-(k as f64) * (big_d + 1.0) / 2.0).exp2();
        assert!((r.rhs - rhs).abs() <= 1e-12 * rhs);
        assert!(r.holds);
    }
}

#[test]
fn claim1_null_cube_is_degenerate() {
    let mu = comb_measure(4, vec![0, 15], 16).unwrap();
    let tc = constants(1, alpha_for_k(4), None).unwrap();
    let eps = epsilon0(&tc, 0.8, 2).unwrap().eps0 / 2.0;
    let cp = ClaimParams { big_d: 0.8, n: 2, eps, guard: 8, witness: WitnessRule::default() };
    let r = verify_claim1(&mu, &CubeIndex::from_index(4, 1, 5).unwrap(), &tc, &cp).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(r.holds);
}

#[test]
fn claim2_full_cover_holds() {
    let mu = counterexample_measure(E, 64).unwrap();
    let tc = constants(1, alpha_for_k(4), None).unwrap();
    let eps = epsilon0(&tc, 0.8, 2).unwrap().eps0 / 2.0;
    let cp = ClaimParams { big_d: 0.8, n: 2, eps, guard: 8, witness: WitnessRule::default() };
    for blocks in 1..=2 {
        let r = theorem::verify_claim2(&mu, &tc, &cp, blocks).unwrap();
        assert!(r.holds, "blocks={blocks} lhs={}", r.lhs);
    }
}

#[test]
fn gain_product_reaches_k_to_the_l() {
    let tc = constants(1, alpha_for_k(10), None).unwrap();
    let (big_d, p) = (1.2, 0.5);
    let g = porosity_gain(&tc, big_d, p).unwrap();
    let n = g.n as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for blocks in 1..=5usize {
        for _ in 0..50 {
            let total = n * blocks;
            let need = (p * total as f64).ceil() as usize;
            let porous = rng.random_range(need..=total);
            let mut flags: Vec<bool> = (0..total).map(|i| i < porous).collect();
            for i in (1..total).rev() {
                flags.swap(i, rng.random_range(0..=i));
            }
            let lp = theorem::gain_product_log2(&tc, big_d, g.n, &flags).unwrap();
            assert!(lp >= blocks as f64 * g.gain.log2() - 1e-9, "blocks={blocks} porous={porous}");
        }
    }
}

#[test]
fn bound_and_k_are_monotone_in_alpha() {
    let mut last_k = 0;
    let mut last_bound = f64::INFINITY;
    for j in 0..400 {
        let alpha = 15.0 / 32.0 + (0.5 - 15.0 / 32.0) * (1.0 - 0.97f64.powi(j + 1));
        let b = dim_bound(1, 0.5, alpha, None).unwrap();
        assert!(b.constants.k >= last_k);
        assert!(b.bound <= last_bound + 1e-15);
        assert!(b.coarse >= b.bound - 1e-12);
        last_k = b.constants.k;
        last_bound = b.bound;
    }
    assert!(last_k >= 15);
}

#[test]
fn c_bound_decreases_to_zero() {
    let mut last = 1.0;
    for i in (1..=10_000).step_by(37) {
        let c = c_bound(i, 3, 1.0, E).unwrap();
        assert!(c <= last);
        last = c;
    }
    assert!(last < 1e-3);
    assert!(c_bound(10, 3, 0.3, E).is_err());
}

#[test]
fn digit_equal_fraction_follows_clt_scale() {
    let mu = counterexample_measure(E, 20_001).unwrap();
    let i = 10_000;
    let ok = (0..100)
        .filter(|&s| {
            let f = digit_equal_fraction(&mu, s, 0, i).unwrap();
            (f.empirical - f.analytic).abs() <= 4.0 / (i as f64).sqrt()
        })
        .count();
    assert!(ok >= 95, "{ok}");
}

#[test]
fn lebesgue_digit_expectation_is_half() {
    let leb = lebesgue(2001).unwrap();
    for i in [1, 10, 2000] {
        let f = digit_equal_fraction(&leb, 1, 0, i).unwrap();
        assert!((f.analytic - 0.5).abs() < 1e-15);
    }
}

#[test]
fn mu_e40_matches_product() {
    let mu = counterexample_measure(E, 64).unwrap();
    let e = even_digits_zero(64).unwrap();
    let m = measure_of_set_approx(&mu, &e, 40).unwrap();
    let want: f64 = (2..=40).step_by(2).map(|j| 1.0 - 1.0 / ((j + 2) as f64).ln()).product();
    assert!((m.mass - want).abs() < 1e-10);
    let full = measure_of_set_approx(&mu, &full_set(64).unwrap(), 40).unwrap();
    assert_eq!(full.mass, 1.0);
}

#[test]
fn eta_block_example() {
    let ew = EtaWeights::new(1, 2, even_digits_zero(30).unwrap(), E).unwrap();
    let w = |t: f64| 1.0 / (t + 2.0).ln();
    let want = 1.0 - w(1.0) * w(2.0) * w(3.0);
    assert!((eta(&CubeIndex::root(1, 1).unwrap(), &ew).unwrap() - want).abs() < 1e-15);
    let chain = eta_product(&[0u8; 24], &ew, 7).unwrap();
    assert!(chain.products.windows(2).all(|p| p[1] < p[0]));
    assert!(chain.within_bound());
}
