use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use advsent::corpus::normalize_text;
use advsent::datagen::{generate, GenConfig};
use advsent::evaluation::macro_f1;
use advsent::model::{Featurizer, ModelConfig, ModelParams};
use advsent::trainer::{combined_loss, Batch, TrainMode};

fn bench_normalize(c: &mut Criterion) {
    let messy = "Visita https://example.com/a?b=c ora!!!!! <b>Davvero</b> &amp;amp; bello...... \
                 scrivi a qualcuno@example.it \t\t per  saperne   di pi\u{F9}?!?!?!"
        .repeat(4);
    c.bench_function("normalize_text", |b| b.iter(|| normalize_text(&messy)));
}

fn bench_featurize(c: &mut Criterion) {
    let featurizer = Featurizer::default();
    let ds = generate(&GenConfig {
        per_cell: 4,
        ..GenConfig::default()
    })
    .unwrap();
    let record = &ds.records[30];
    c.bench_function("featurize", |b| {
        b.iter(|| featurizer.featurize_sparse(&record.title, &record.text))
    });
}

fn bench_train_step(c: &mut Criterion) {
    let model_cfg = ModelConfig {
        hash_dim: 1024,
        hidden_dim: 128,
        dropout: 0.1,
    };
    let params = ModelParams::init(&model_cfg, 42);
    let featurizer = Featurizer::new(model_cfg.hash_dim);
    let ds = generate(&GenConfig {
        per_cell: 8,
        ..GenConfig::default()
    })
    .unwrap();
    let records: Vec<_> = ds.records.iter().take(32).collect();
    let batch = Batch::from_records(&featurizer, &records).unwrap();
    c.bench_function("combined_loss_batch32", |b| {
        b.iter_batched(
            || ChaCha8Rng::seed_from_u64(7),
            |mut rng| {
                combined_loss(
                    &model_cfg,
                    &params,
                    &batch,
                    (0.5, 0.5),
                    TrainMode::LossReversal,
                    Some(&mut rng),
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_macro_f1(c: &mut Criterion) {
    use advsent::corpus::Rating;
    let gold: Vec<Rating> = (0..10_000).map(|i| Rating::ALL[i % 4]).collect();
    let pred: Vec<Rating> = (0..10_000).map(|i| Rating::ALL[(i * 7) % 4]).collect();
    c.bench_function("macro_f1_10k", |b| b.iter(|| macro_f1(&gold, &pred).unwrap()));
}

criterion_group!(
    benches,
    bench_normalize,
    bench_featurize,
    bench_train_step,
    bench_macro_f1
);
criterion_main!(benches);
