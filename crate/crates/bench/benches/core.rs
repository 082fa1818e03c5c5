use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kf_bench::fixture;
use kf_core::gp::FitnessContext;
use kf_core::synthetic::modular_views;
use kf_core::{gaussian_gram, seed, train_binary, FitnessMode, KernelExpr, SvmParams};
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("gaussian_gram");
    for per_class in [50, 150] {
        let data = modular_views(per_class, 0.25, 1).unwrap();
        let features = &data.views[0].1;
        group.bench_with_input(BenchmarkId::from_parameter(3 * per_class), features, |b, f| {
            b.iter(|| gaussian_gram(black_box(f), 0.5).unwrap())
        });
    }
    group.finish();

    let fx = fixture(100);
    let expr = KernelExpr::parse("(+ (* K1 K2) (* (+ K1 K2) K2))").unwrap();
    c.bench_function("evaluate_depth3", |b| b.iter(|| expr.evaluate(black_box(&fx.bank)).unwrap()));
}

fn solver(c: &mut Criterion) {
    let fx = fixture(100);
    let gram = KernelExpr::parse("(* K1 K2)").unwrap().evaluate(&fx.bank).unwrap();
    let idx: Vec<usize> = (0..fx.labels.len()).filter(|&i| fx.labels[i] != 2).collect();
    let y: Vec<f64> = idx.iter().map(|&i| if fx.labels[i] == 0 { -1.0 } else { 1.0 }).collect();
    let sub = gram.as_matrix().select(&idx, &idx).unwrap();
    let params = SvmParams::default();
    c.bench_function("train_binary_200", |b| {
        b.iter(|| train_binary(black_box(&sub), &y, &params, &mut seed::rng(0)).unwrap())
    });
}

fn fitness(c: &mut Criterion) {
    let fx = fixture(60);
    let ctx = FitnessContext::new(
        &fx.bank,
        &fx.labels,
        &fx.split,
        &SvmParams::default(),
        FitnessMode::Validation,
    )
    .unwrap();
    let expr = KernelExpr::parse("(* K1 K2)").unwrap();
    c.bench_function("fitness_validation", |b| b.iter(|| ctx.evaluate(black_box(&expr))));
}

criterion_group!(benches, kernels, solver, fitness);
criterion_main!(benches);
