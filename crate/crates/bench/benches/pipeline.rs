use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tvclt::stein::{solve_stein, SteinGrid, TestFunction};
use tvclt::sums::sum_density;
use tvclt::{DistributionSpec, GridConfig, SumSequence};

fn sums(c: &mut Criterion) {
    let laplace = DistributionSpec::laplace(1.0).unwrap();
    let mut g = c.benchmark_group("sum_density");
    for n in [2usize, 16, 64] {
        let seq = SumSequence::iid(laplace.clone(), n).unwrap();
        g.bench_function(format!("laplace_n{n}_m16384"), |b| {
            b.iter(|| sum_density(black_box(&seq), &GridConfig::default()).unwrap())
        });
    }
    let het = SumSequence::new((1..=20).map(|k| laplace.with_sd(1.0 + (k % 3) as f64).unwrap()).collect()).unwrap();
    g.bench_function("laplace_alternating_n20_m16384", |b| {
        b.iter(|| sum_density(black_box(&het), &GridConfig::default()).unwrap())
    });
    g.finish();
}

fn fisher(c: &mut Criterion) {
    let specs = [
        ("laplace", DistributionSpec::laplace(1.0).unwrap()),
        ("logistic", DistributionSpec::logistic(1.0).unwrap()),
        ("smoothed_rademacher", DistributionSpec::smoothed_rademacher(0.5).unwrap()),
    ];
    let mut g = c.benchmark_group("fisher_j");
    for (name, spec) in &specs {
        g.bench_function(*name, |b| b.iter(|| black_box(spec).fisher_j().unwrap()));
    }
    g.finish();
}

fn stein(c: &mut Criterion) {
    let grid = SteinGrid { half_width: 8.0, points: 161 };
    let h = TestFunction::random_piecewise_linear(1, 1).remove(0);
    c.bench_function("solve_stein/piecewise_linear_161", |b| b.iter(|| solve_stein(black_box(&h), &grid).unwrap()));
    let sign = TestFunction::sign();
    c.bench_function("solve_stein/sign_161", |b| b.iter(|| solve_stein(black_box(&sign), &grid).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = sums, fisher, stein
}
criterion_main!(benches);
