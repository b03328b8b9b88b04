//! Construction and evaluation benchmarks: multiplication gadget assembly,
//! grid interpolation builds, and single-point evaluation throughput.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use relunet::gadgets::build_mult;
use relunet::EvalScratch;
use relunet_bench::quadratic_build;
use std::hint::black_box;

fn bench_mult_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("mult-build");
    for m in [8usize, 16, 24] {
        group.bench_function(format!("m{m}"), |b| {
            b.iter(|| build_mult(black_box(m)).unwrap())
        });
    }
    group.finish();
}

fn bench_holder_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid-build");
    group.sample_size(20);
    for n in [25usize, 81] {
        group.bench_function(format!("n{n}"), |b| {
            b.iter(|| quadratic_build(black_box(n), 10))
        });
    }
    group.finish();
}

fn bench_eval(c: &mut Criterion) {
    let built = quadratic_build(81, 10);
    let mut group = c.benchmark_group("eval");
    group.bench_function("fresh-buffers", |b| {
        b.iter(|| built.net.eval(black_box(&[0.4, 0.6])).unwrap())
    });
    group.bench_function("reused-scratch", |b| {
        b.iter_batched_ref(
            EvalScratch::default,
            |scratch| {
                built.net.eval_into(black_box(&[0.4, 0.6]), scratch).unwrap();
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_mult_build, bench_holder_build, bench_eval);
criterion_main!(benches);
