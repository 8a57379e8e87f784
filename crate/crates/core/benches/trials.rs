use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hdcml::experiments::{run_table2, run_table3, Execution, ExperimentConfig};
use std::hint::black_box;

fn config(trials: usize, exec: Execution) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(1, trials, 1000);
    cfg.execution = exec;
    cfg
}

fn tables(c: &mut Criterion) {
    let mut g = c.benchmark_group("trials");
    g.sample_size(10);
    for trials in [4, 16] {
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let cfg = config(trials, exec);
            g.bench_with_input(BenchmarkId::new(format!("table2/{name}"), trials), &cfg, |b, cfg| {
                b.iter(|| black_box(run_table2(cfg).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new(format!("table3/{name}"), trials), &cfg, |b, cfg| {
                b.iter(|| black_box(run_table3(cfg).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, tables);
criterion_main!(benches);
