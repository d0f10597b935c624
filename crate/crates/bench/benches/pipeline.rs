use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use depscreen::corpus::normalize_text;
use depscreen::evalsuite::{confusion, MetricsReport};
use depscreen::synth::{separable_corpus, SynthSpec};
use depscreen::trainer::{reference_backend, train, MemoryCheckpoints};
use depscreen::{Label, LoraConfig, TrainConfig};

fn bench_normalize(c: &mut Criterion) {
    let post = "Can't sleep again 😔 @alice@mastodon.social said to read https://example.org/help?q=1 \
                but honestly #tired of everything... @bob";
    c.bench_function("normalize_text", |b| b.iter(|| normalize_text(black_box(post))));
}

fn bench_metrics(c: &mut Criterion) {
    let golds: Vec<Label> =
        (0..10_000).map(|i| if i % 3 == 0 { Label::Depressed } else { Label::NonDepressed }).collect();
    let preds: Vec<Label> =
        (0..10_000).map(|i| if i % 5 == 0 { Label::Depressed } else { Label::NonDepressed }).collect();
    c.bench_function("confusion_and_metrics_10k", |b| {
        b.iter(|| {
            let cm = confusion(black_box(&preds), black_box(&golds)).unwrap();
            MetricsReport::from_confusion("bench", &cm)
        })
    });
}

fn bench_training_epoch(c: &mut Criterion) {
    let corpus = separable_corpus(SynthSpec::default()).unwrap();
    let cfg = TrainConfig { num_train_epochs: 1, ..TrainConfig::default() };
    let lora = LoraConfig::default();
    c.bench_function("reference_training_epoch_1000", |b| {
        b.iter(|| {
            let mut backend = reference_backend(2000, 1.0, 42).unwrap();
            let mut store = MemoryCheckpoints::default();
            train(&mut backend, &corpus, &lora, &cfg, &mut store).unwrap()
        })
    });
}

criterion_group!(benches, bench_normalize, bench_metrics, bench_training_epoch);
criterion_main!(benches);
