//! Parallel versus sequential execution of the data-parallel workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phi4_core::gep::critical_scan_with;
use phi4_core::par::Execution;
use phi4_core::runner::{run_with, ExperimentConfig, Mode, NoiseConfig, OneOrMany, Task};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn gep_scan(c: &mut Criterion) {
    let sizes: Vec<usize> = (1..=16).map(|k| 64 * k).collect();
    let mut g = c.benchmark_group("gep_critical_scan");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| critical_scan_with(0.1, &sizes, exec)));
    }
    g.finish();
}

fn cv_sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig { sites: Some(OneOrMany::One(10)), ..ExperimentConfig::new(Mode::Cv) };
    let mut g = c.benchmark_group("cv_exact_sweep_L10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_with(Task::CvSweep, &cfg, exec).unwrap()));
    }
    g.finish();
}

fn dv_sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        sites: Some(OneOrMany::One(10)),
        shots: Some(2000),
        seed: Some(1),
        noise: Some(NoiseConfig { ro_flip: 0.01, cnot_p: 0.02 }),
        ..ExperimentConfig::new(Mode::Dv)
    };
    let mut g = c.benchmark_group("dv_noisy_sweep_L10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_with(Task::DvSweep, &cfg, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gep_scan, cv_sweep, dv_sweep);
criterion_main!(benches);
