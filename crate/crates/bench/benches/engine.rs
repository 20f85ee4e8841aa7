use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use swpe_bench::source;
use swpe_core::engine::rng::trial_stream;
use swpe_core::engine::{run_batch_with_threads, TrialKernel};
use swpe_core::{ExperimentConfig, RunPlan, SettingPair};

fn trial_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial_kernel");
    group.throughput(Throughput::Elements(1));
    for m in [1u32, 19] {
        let kernel = TrialKernel::new(&ExperimentConfig::default().with_m(m), 0.7, &SettingPair::hv());
        let mut t = 0u64;
        group.bench_with_input(BenchmarkId::from_parameter(m), &kernel, |b, k| {
            b.iter(|| {
                t += 1;
                black_box(k.run(t, &mut trial_stream(1, 0, t)))
            })
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    const TRIALS: u64 = 1 << 18;
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(20);
    group.throughput(Throughput::Elements(TRIALS));
    for m in [1u32, 19] {
        let plan = RunPlan::new(source(m), 0.7, vec![SettingPair::hv()], TRIALS);
        group.bench_with_input(BenchmarkId::from_parameter(m), &plan, |b, plan| {
            b.iter(|| black_box(run_batch_with_threads(plan, 1).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, trial_kernel, batch);
criterion_main!(benches);
