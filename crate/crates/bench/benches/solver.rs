use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use platoon_bench::fixtures;
use platoon_core::{
    brute_force_equilibrium, check_provider_kkt, run_sweep, solve_equilibrium, Scenario, SweepAxis, SweepParam,
    SweepSpec, KKT_TOLERANCE,
};

fn closed_form(c: &mut Criterion) {
    let base = Scenario::baseline();
    c.bench_function("solve_equilibrium/reference", |b| {
        b.iter(|| solve_equilibrium(black_box(&base)).unwrap())
    });
    let many = fixtures(1000);
    c.bench_function("solve_equilibrium/1000_random", |b| {
        b.iter(|| many.iter().map(|s| solve_equilibrium(s).unwrap().fee).sum::<f64>())
    });
    let eq = solve_equilibrium(&base).unwrap();
    c.bench_function("check_provider_kkt/reference", |b| {
        b.iter(|| check_provider_kkt(black_box(&base), black_box(&eq), KKT_TOLERANCE).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let base = Scenario::baseline();
    let mut group = c.benchmark_group("brute_force_equilibrium");
    group.sample_size(10);
    for step in [1e-1, 1e-2, 1e-3] {
        group.bench_with_input(BenchmarkId::from_parameter(step), &step, |b, &step| {
            b.iter(|| brute_force_equilibrium(black_box(&base), step).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let spec = SweepSpec::new(
        Scenario::baseline(),
        SweepAxis::linspace(SweepParam::Beta, 0.3, 1.7, 100),
    )
    .with_axis2(SweepAxis::linspace(SweepParam::TotalSubsidy, 0.0, 200.0, 100));
    let mut group = c.benchmark_group("run_sweep");
    group.sample_size(20);
    group.bench_function("beta_x_gamma_100x100", |b| {
        b.iter(|| run_sweep(black_box(&spec)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, closed_form, oracle, sweep);
criterion_main!(benches);
