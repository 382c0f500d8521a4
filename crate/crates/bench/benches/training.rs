use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proofgrade::grader::{embed_records, loss_and_gradient, train_rubric_model, LinearHead};
use proofgrade::synthetic::{synthetic_corpus, SyntheticSpec};
use proofgrade::{Embedder, ProofRecord, ProviderConfig, RubricId, TrainConfig};

fn training(c: &mut Criterion) {
    let records = synthetic_corpus(&SyntheticSpec::new("P1", 1000, 64, 0, 3));
    let e = Embedder::from_config(&ProviderConfig::deterministic("bench", 64, 0)).unwrap();
    let refs: Vec<&ProofRecord> = records.iter().collect();
    let set = embed_records(&refs, &e).unwrap();
    let y = set.rubric_labels(RubricId::R3);
    let cfg = TrainConfig::default();

    let head = LinearHead::zeros(set.x.dim());
    c.bench_function("loss_and_gradient/1000x64", |b| {
        b.iter(|| loss_and_gradient(black_box(&head), &set.x, &y).unwrap())
    });

    let mut g = c.benchmark_group("train_rubric_model/1000x64");
    g.sample_size(10);
    for epochs in [100, 500] {
        g.bench_with_input(BenchmarkId::from_parameter(epochs), &epochs, |b, &epochs| {
            b.iter(|| train_rubric_model(&set.x, &y, &cfg, epochs).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, training);
criterion_main!(benches);
