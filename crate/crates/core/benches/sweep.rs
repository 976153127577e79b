use std::hint::black_box;

use catrep::explore::{optimize, sweep, Axis, Objective, OptimizeSpec, SweepSpec};
use catrep::graph::{equivalence_check, EquivalenceParams};
use catrep::par::{map_with, Execution};
use catrep::rate::{ProtocolConfig, Variant};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const SCHEDULES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn base() -> ProtocolConfig {
    ProtocolConfig {
        total_distance_km: 1000.0,
        link_length_km: 1.0,
        ..Default::default()
    }
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_alpha_channels");
    for points in [64usize, 256] {
        let alphas: Vec<f64> = (0..points)
            .map(|i| 0.2 + 2.3 * i as f64 / (points - 1) as f64)
            .collect();
        for (name, exec) in SCHEDULES {
            let mut spec = SweepSpec::new(
                base(),
                vec![
                    (Axis::Channels, (1..=16).map(f64::from).collect()),
                    (Axis::Alpha, alphas.clone()),
                ],
            );
            spec.execution = exec;
            group.bench_with_input(BenchmarkId::new(name, points * 16), &spec, |b, spec| {
                b.iter(|| black_box(sweep(spec).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_optimize(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize");
    group.sample_size(20);
    let config = ProtocolConfig {
        variant: Variant::Graph,
        ..base()
    };
    for (name, exec) in SCHEDULES {
        let spec = OptimizeSpec {
            objective: Objective::BitsPerSecond,
            execution: exec,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| black_box(optimize(&config, &spec).unwrap())));
    }
    group.finish();
}

fn bench_equivalence(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph_equivalence_points");
    group.sample_size(10);
    let points = [(0.8, 0.6), (0.8, 0.9), (1.2, 0.6), (1.2, 0.9)];
    for (name, exec) in SCHEDULES {
        group.bench_function(name, |b| {
            b.iter(|| {
                map_with(exec, &points, |&(alpha, eta)| {
                    black_box(
                        equivalence_check(EquivalenceParams { alpha, eta })
                            .unwrap()
                            .max_deviation,
                    )
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_optimize, bench_equivalence);
criterion_main!(benches);
