use std::f64::consts::E;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use porous_core::porosity::{porous_cube_flags, CubePorosityParams, WitnessRule};
use porous_core::theorem::alpha_for_k;
use porous_core::*;

fn cascade(c: &mut Criterion) {
    let mu = counterexample_measure(E, 64).unwrap();
    c.bench_function("cell_mass_40_bits", |b| b.iter(|| mu.cell_mass(black_box(0x5_5555_5555), 40).unwrap()));
    c.bench_function("mass_of_ball", |b| b.iter(|| mu.mass_of_ball(black_box(0.3141), 1.0 / 64.0, 24).unwrap()));
    c.bench_function("sample_points_100x60", |b| b.iter(|| mu.sample_points(black_box(1), 100, 60)));
}

fn porosity(c: &mut Criterion) {
    let mu = counterexample_measure(E, 64).unwrap();
    let e = example_set(1, 2, 1, 4).unwrap();
    c.bench_function("por_measure_r2^-6", |b| {
        b.iter(|| por_measure(&mu, black_box(0.3141), 1.0 / 64.0, 0.01, 14).unwrap())
    });
    c.bench_function("por_set_example_30_bits", |b| b.iter(|| por_set(&e, black_box(0.2), 1.0 / 1024.0, 30).unwrap()));
    let p = CubePorosityParams { k: 4, l: 2, alpha: alpha_for_k(4), eps: 0.001, guard: 8, witness: WitnessRule::CornerAndChildCentres };
    c.bench_function("porous_cube_flags_256", |b| b.iter(|| porous_cube_flags(&mu, 2, 0, 256, black_box(&p)).unwrap()));
}

fn dimension(c: &mut Criterion) {
    let mu = bernoulli_cascade(0.25, 64).unwrap();
    let tau = TauRule::Constant { tau: 0.45 };
    c.bench_function("certificate_depth_30", |b| b.iter(|| dimension_certificate(&mu, black_box(0.9), &tau, 1, 30).unwrap()));
    let by_depth = TauRule::ByDepth { taus: vec![0.4, 0.45] };
    c.bench_function("certificate_tree_depth_12", |b| {
        b.iter(|| dimension_certificate(&mu, black_box(0.9), &by_depth, 1, 12).unwrap())
    });
    c.bench_function("packing_estimate_100x24", |b| {
        b.iter(|| packing_dimension_estimate(&mu, 100, 24, 0.5, black_box(2), 5).unwrap())
    });
}

fn theorem(c: &mut Criterion) {
    c.bench_function("constants_exact_k", |b| b.iter(|| constants(1, black_box(alpha_for_k(20)), None).unwrap()));
    let mu = lebesgue(64).unwrap();
    let tc = constants(1, alpha_for_k(4), None).unwrap();
    let big_d = dim_bound(1, 0.5, tc.alpha, None).unwrap().d0 + 0.01;
    let eps = epsilon0(&tc, big_d, 2).unwrap().eps0 / 2.0;
    let cp = ClaimParams { big_d, n: 2, eps, guard: 8, witness: WitnessRule::CornerAndChildCentres };
    let q = CubeIndex::root(4, 1).unwrap();
    c.bench_function("claim1_k4_n2", |b| b.iter(|| verify_claim1(&mu, black_box(&q), &tc, &cp).unwrap()));
}

fn counterexample(c: &mut Criterion) {
    let mu = counterexample_measure(E, 64).unwrap();
    let ew = EtaWeights::new(1, 2, even_digits_zero(64).unwrap(), E).unwrap();
    c.bench_function("weighted_sum_i6", |b| b.iter(|| weighted_sum_check(&ew, &mu, black_box(6)).unwrap()));
    let long = counterexample_measure(E, 100_001).unwrap();
    c.bench_function("digit_equal_fraction_1e5", |b| {
        b.iter(|| digit_equal_fraction(&long, black_box(1), 0, 100_000).unwrap())
    });
}

criterion_group!(benches, cascade, porosity, dimension, theorem, counterexample);
criterion_main!(benches);
