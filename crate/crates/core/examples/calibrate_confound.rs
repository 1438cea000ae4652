//! Scratch harness for picking the confound-experiment configuration.

use advsent::corpus::{Rating, Split};
use advsent::datagen::{generate, GenConfig};
use advsent::evaluation::macro_f1;
use advsent::model::ModelConfig;
use advsent::trainer::{predict_dataset, train, OptimizerConfig, TrainConfig, TrainMode};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(5e-3);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let seeds: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(3);

    let model_cfg = ModelConfig {
        hash_dim: 4096,
        hidden_dim: 64,
        dropout: 0.1,
    };

    let mut margins = Vec::new();
    for seed in 0..seeds {
        let ds = generate(&GenConfig {
            seed,
            per_cell: 500,
            sentiment_vocab: 200,
            surface_vocab: 600,
            domain_vocab: 300,
            rho_train: 0.9,
            rho_test: -0.9,
            ..GenConfig::default()
        })
        .unwrap();
        let train_ds = ds.split(Split::Train);
        let valid_ds = ds.split(Split::Valid);
        let test_ds = ds.split(Split::Test);
        let gold: Vec<Rating> = test_ds.records.iter().map(|r| r.rating).collect();

        let f1_of = |mode: TrainMode| -> (f64, f64) {
            let cfg = TrainConfig {
                mode,
                seed,
                max_epochs: epochs,
                optimizer: OptimizerConfig {
                    learning_rate: lr,
                    ..OptimizerConfig::default()
                },
                ..TrainConfig::default()
            };
            let outcome = train(&model_cfg, &cfg, &train_ds, &valid_ds).unwrap();
            let predictions = predict_dataset(&model_cfg, &outcome.params, &test_ds).unwrap();
            (
                macro_f1(&gold, &predictions).unwrap(),
                outcome.best_valid_f1,
            )
        };
        let (base_test, base_valid) = f1_of(TrainMode::Baseline);
        let (adv_test, adv_valid) = f1_of(TrainMode::LossReversal);
        let (gr_test, gr_valid) = f1_of(TrainMode::GradientReversal);
        println!(
            "seed {seed}: baseline {base_test:.2}/{base_valid:.2} | loss-rev {adv_test:.2}/{adv_valid:.2} | grad-rev {gr_test:.2}/{gr_valid:.2} | margin {:+.2}",
            adv_test - base_test
        );
        margins.push(adv_test - base_test);
    }
    println!(
        "lr {lr}, epochs {epochs}: mean margin {:+.2}",
        margins.iter().sum::<f64>() / margins.len() as f64
    );
}
