//! Sequential versus rayon execution of the trial- and cell-parallel loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rareval::stats::{stability, subset_experiment, StabilityConfig, SubsetConfig};
use rareval::synth::{generate_campaign, SynthSpec};
use rareval::{evaluate_campaign, EvalOptions, Execution, Metric, MetricDefaults};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn campaign() -> rareval::Campaign {
    generate_campaign(&SynthSpec {
        n_systems: 32,
        n_topics: 25,
        n_relevant_per_topic: 40,
        doc_pool_size: 1000,
        overlap_bias: 0.3,
        run_depth: 100,
        seed: 7,
    })
    .unwrap()
}

fn metric() -> Metric {
    Metric::parse("P@100_rareness(alpha=1)", &MetricDefaults::default()).unwrap()
}

fn bench_evaluate(c: &mut Criterion) {
    let camp = campaign();
    let metrics: Vec<Metric> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&a| metric().with_alpha(a))
        .collect();
    let mut g = c.benchmark_group("evaluate_campaign");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_campaign(&camp, &metrics, &EvalOptions::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn bench_stability(c: &mut Criterion) {
    let camp = campaign();
    let cfg = StabilityConfig::new(10, 1000, 1);
    let mut g = c.benchmark_group("stability");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| stability(&camp, &metric(), &EvalOptions::default(), &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_subset(c: &mut Criterion) {
    let camp = campaign();
    let cfg = SubsetConfig { subset_size: 8, trials: 200, seed: 1 };
    let mut g = c.benchmark_group("subset_experiment");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| subset_experiment(&camp, &metric(), &EvalOptions::default(), &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_evaluate, bench_stability, bench_subset);
criterion_main!(benches);
