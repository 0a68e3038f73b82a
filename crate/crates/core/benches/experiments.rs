use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pairwise_rcd::data::{synth_gaussian, LabelRule, Replacement};
use pairwise_rcd::stability::{
    on_average_l2_stability, stability_experiment, ModelSpec, OnAverageConfig, Optimizer,
    SampleSource, StabilityConfig, StepRule,
};
use pairwise_rcd::{Execution, PairwiseLoss, Schedule};

fn spec() -> ModelSpec {
    ModelSpec::new(PairwiseLoss::from_key("auc-logistic").unwrap(), 0.0)
}

fn stability_sweep(c: &mut Criterion) {
    let data = Arc::new(synth_gaussian(100, 10, LabelRule::BalancedRandom, 1).unwrap());
    let mut group = c.benchmark_group("stability_sweep");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = StabilityConfig {
            spec: spec(),
            optimizer: Optimizer::Rcd,
            etas: vec![0.05, 0.25, 1.0, 4.0],
            step_rule: StepRule::Scaled,
            iterations: 200,
            reps: 16,
            master_seed: 7,
            execution: exec,
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &cfg,
            |b, cfg| {
                b.iter(|| {
                    black_box(stability_experiment(&data, Replacement::Pool(&data), cfg).unwrap())
                })
            },
        );
    }
    group.finish();
}

fn on_average(c: &mut Criterion) {
    let pool = synth_gaussian(400, 10, LabelRule::BalancedRandom, 2).unwrap();
    let mut group = c.benchmark_group("on_average_l2");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = OnAverageConfig {
            spec: spec(),
            optimizer: Optimizer::Rcd,
            schedule: Schedule::Constant(0.5),
            iterations: 100,
            n: 50,
            sample_indices: 4,
            reps: 16,
            seed: 3,
            execution: exec,
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &cfg,
            |b, cfg| {
                b.iter(|| {
                    black_box(on_average_l2_stability(SampleSource::Pool(&pool), cfg).unwrap())
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, stability_sweep, on_average);
criterion_main!(benches);
