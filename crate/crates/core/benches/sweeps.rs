use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magictrap::dls::TrapCoefficients;
use magictrap::ramsey::{Ramsey, TrapFieldConfig};
use magictrap::Execution;

const POLICIES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn base() -> TrapFieldConfig {
    TrapFieldConfig::at_magic(TrapCoefficients::experimental(), 3.115, 17e-6).unwrap()
}

fn coherence_sweep(c: &mut Criterion) {
    let ramsey = Ramsey::default();
    let cfg = base();
    let ratios: Vec<f64> = (0..=20).map(|i| 0.5 + 0.05 * i as f64).collect();
    let mut group = c.benchmark_group("coherence_vs_depth");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                ramsey
                    .coherence_vs_depth(black_box(&cfg), &ratios, 4.0, 0.3, exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let ramsey = Ramsey::default();
    let cfg = base();
    let mut group = c.benchmark_group("monte_carlo_population");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                ramsey
                    .monte_carlo_population(black_box(&cfg), 0.5, 1 << 20, 7, exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn ramsey_trace(c: &mut Criterion) {
    let ramsey = Ramsey::default();
    let cfg = base();
    let times: Vec<f64> = (0..200).map(|i| 4.0 * i as f64 / 199.0).collect();
    let mut group = c.benchmark_group("ramsey_trace");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ramsey.trace(black_box(&cfg), &times, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, coherence_sweep, monte_carlo, ramsey_trace);
criterion_main!(benches);
