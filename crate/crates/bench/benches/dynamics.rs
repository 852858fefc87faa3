use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use gossip_bench::ring_model;
use gossip_core::dynamics::run_trajectory;
use gossip_core::montecarlo::ExperimentConfig;
use gossip_core::rng::trial_rng;
use gossip_core::{theory_report, TheoryParams};

const STEPS: u64 = 10_000;

fn trajectory(c: &mut Criterion) {
    let mut group = c.benchmark_group("trajectory");
    group.throughput(Throughput::Elements(STEPS));
    for n in [4, 64, 1024] {
        let model = ring_model(n);
        let x0: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let slots = [STEPS];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = trial_rng(1, 0);
            b.iter(|| run_trajectory(&model, black_box(&x0), 0, STEPS, &slots, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let cfg = ExperimentConfig::from_value(serde_json::json!({
        "graph": {"source": "generate", "topology": {"kind": "ring"}, "n": 4, "seed": 0},
        "probs": {"alpha": 0.4, "beta": 0.3, "gamma": 0.3},
        "schedules": {"T": {"kind": "constant", "value": 0.25}, "S": {"kind": "constant", "value": 0.1}},
        "trials": 1000,
        "steps": 200,
        "checkpoints": {"every": 10}
    }))
    .unwrap();
    let prepared = cfg.prepare().unwrap();
    let mut group = c.benchmark_group("experiment");
    group.sample_size(20);
    group.bench_function("ring4_1000x200", |b| b.iter(|| prepared.run()));
    group.finish();
}

fn theory(c: &mut Criterion) {
    let model = ring_model(12);
    let params = TheoryParams::default();
    c.bench_function("theory_report/ring12", |b| b.iter(|| theory_report(black_box(&model), &params).unwrap()));
}

criterion_group!(benches, trajectory, experiment, theory);
criterion_main!(benches);
