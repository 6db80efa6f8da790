use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rxlin::harness::{run_scenario, sweep, Method, ScenarioConfig, SweepAxis};
use rxlin::signal::WaveformConfig;
use rxlin::Execution;

fn config(exec: Execution) -> ScenarioConfig {
    ScenarioConfig {
        nr: 32,
        num_users: 4,
        waveform: WaveformConfig {
            symbol_count: 1000,
            ..Default::default()
        },
        methods: vec![Method::None, Method::SatRecovery],
        trials: 4,
        execution: exec,
        record_wall_time: false,
        ..Default::default()
    }
}

fn bench_execution(c: &mut Criterion) {
    let mut group = c.benchmark_group("execution");
    group.sample_size(10);
    for exec in [Execution::Serial, Execution::Parallel] {
        let cfg = config(exec);
        group.bench_with_input(BenchmarkId::new("run", format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| black_box(run_scenario(cfg).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("sweep3", format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| black_box(sweep(cfg, SweepAxis::InputPower, &[-50.0, -43.0, -36.0]).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_execution);
criterion_main!(benches);
