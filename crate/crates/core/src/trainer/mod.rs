//! Training loop: adversarial objective, meta-updated coefficients, AdamW
//! with warmup/decay, early stopping on validation macro-F1.

mod loss;
mod meta;
mod optim;

pub use loss::{combined_loss, Batch, LossBreakdown, TrainMode};
pub use meta::{meta_loss_at, meta_update, MetaState, MetaUpdate, LAMBDA_MAX, LAMBDA_MIN};
pub use optim::{schedule_factor, AdamW, OptimizerConfig, SchedulePosition, StepInfo};

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::corpus::{Dataset, Rating};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::model::{predict_ratings, Featurizer, FeatureVec, ModelConfig, ModelParams};

/// Training-loop configuration. Out of the box this mirrors the reference
/// protocol: batch 32, up to 5 epochs with patience 3 on validation
/// macro-F1, lambdas initialized to 0.5 and meta-updated every 100 steps
/// with eta = 0.01, seed 42.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stopping patience in epochs without macro-F1 improvement.
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub lambda_init: (f64, f64),
    pub meta_lr: f64,
    /// Optimizer steps between meta updates.
    pub meta_interval: u64,
    /// Size of the freshly sampled validation minibatch per meta update.
    pub meta_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::LossReversal,
            batch_size: 32,
            max_epochs: 5,
            patience: 3,
            seed: 42,
            optimizer: OptimizerConfig::default(),
            lambda_init: (0.5, 0.5),
            meta_lr: 0.01,
            meta_interval: 100,
            meta_batch_size: 32,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.meta_batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, max_epochs, and meta_batch_size must be positive".to_string(),
            ));
        }
        if self.meta_interval == 0 {
            return Err(Error::InvalidArgument(
                "meta_interval must be positive".to_string(),
            ));
        }
        for (name, l) in [("lambda1", self.lambda_init.0), ("lambda2", self.lambda_init.1)] {
            if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&l) {
                return Err(Error::InvalidArgument(format!(
                    "initial {name} must be in [{LAMBDA_MIN}, {LAMBDA_MAX}], got {l}"
                )));
            }
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Step {
        step: u64,
        epoch: usize,
        loss_rating: f64,
        loss_domain: f64,
        loss_lang: f64,
        loss_total: f64,
        /// Coefficients used in this step's loss.
        lambda1: f64,
        lambda2: f64,
        lr: f64,
        /// Whether a meta update fired at the end of this step.
        meta_updated: bool,
    },
    Epoch {
        epoch: usize,
        valid_accuracy: f64,
        valid_macro_f1: f64,
        improved: bool,
    },
}

/// Append-only training log; serializes to JSON-lines.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub fn write_jsonl<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut *writer, record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<TrainingLog> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        Ok(TrainingLog { records })
    }

    pub fn steps(&self) -> impl Iterator<Item = &LogRecord> {
        self.records
            .iter()
            .filter(|r| matches!(r, LogRecord::Step { .. }))
    }
}

/// Everything a finished run hands back.
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub log: TrainingLog,
    pub best_epoch: usize,
    pub best_valid_f1: f64,
    /// Final adversarial coefficients.
    pub lambda: (f64, f64),
}

// Featurized records with label indices, kept sparse until batched.
struct Prepared {
    features: Vec<FeatureVec>,
    ratings: Vec<usize>,
    domains: Vec<usize>,
    langs: Vec<usize>,
    gold: Vec<Rating>,
}

impl Prepared {
    fn from_dataset(featurizer: &Featurizer, ds: &Dataset) -> Prepared {
        Prepared {
            features: ds
                .records
                .iter()
                .map(|r| featurizer.featurize_sparse(&r.title, &r.text))
                .collect(),
            ratings: ds.records.iter().map(|r| r.rating.class_index()).collect(),
            domains: ds.records.iter().map(|r| r.domain.index()).collect(),
            langs: ds.records.iter().map(|r| r.language.index()).collect(),
            gold: ds.records.iter().map(|r| r.rating).collect(),
        }
    }

    fn len(&self) -> usize {
        self.features.len()
    }

    fn batch(&self, indices: &[usize], hash_dim: usize) -> Result<Batch> {
        let mut data = vec![0.0; indices.len() * hash_dim];
        for (row, &i) in indices.iter().enumerate() {
            self.features[i].write_dense(&mut data[row * hash_dim..(row + 1) * hash_dim]);
        }
        Batch::new(
            Tensor::new(vec![indices.len(), hash_dim], data)?,
            indices.iter().map(|&i| self.ratings[i]).collect(),
            indices.iter().map(|&i| self.domains[i]).collect(),
            indices.iter().map(|&i| self.langs[i]).collect(),
        )
    }
}

/// Runs the full training loop and returns the best-epoch parameters plus
/// the step/epoch log. Identical configs and seeds produce bit-identical
/// outcomes.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_ds: &Dataset,
    valid_ds: &Dataset,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    train_ds.require_non_empty("training split")?;
    valid_ds.require_non_empty("validation split")?;

    let featurizer = Featurizer::new(model_cfg.hash_dim);
    let train_data = Prepared::from_dataset(&featurizer, train_ds);
    let valid_data = Prepared::from_dataset(&featurizer, valid_ds);

    let mut params = ModelParams::init(model_cfg, train_cfg.seed);
    let mut optimizer = AdamW::new(train_cfg.optimizer.clone(), &params);

    // Independent deterministic streams so that, e.g., adding a meta
    // update cannot shift the shuffle order.
    let mut shuffle_rng = seeded_stream(train_cfg.seed, 1);
    let mut dropout_rng = seeded_stream(train_cfg.seed, 2);
    let mut meta_rng = seeded_stream(train_cfg.seed, 3);

    let mut meta_state = MetaState {
        lambda1: train_cfg.lambda_init.0,
        lambda2: train_cfg.lambda_init.1,
        meta_lr: train_cfg.meta_lr,
        update_interval: train_cfg.meta_interval,
    };
    if train_cfg.mode == TrainMode::Baseline {
        meta_state.lambda1 = 0.0;
        meta_state.lambda2 = 0.0;
    }

    let batches_per_epoch = train_data.len().div_ceil(train_cfg.batch_size);
    let total_steps = (batches_per_epoch * train_cfg.max_epochs) as u64;

    let mut log = TrainingLog::default();
    let mut step: u64 = 0;
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut epochs_without_improvement = 0usize;

    for epoch in 1..=train_cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        order.shuffle(&mut shuffle_rng);

        for chunk in order.chunks(train_cfg.batch_size) {
            let batch = train_data.batch(chunk, model_cfg.hash_dim)?;
            let lambda = meta_state.lambda();
            let (breakdown, mut grads) = combined_loss(
                model_cfg,
                &params,
                &batch,
                lambda,
                train_cfg.mode,
                Some(&mut dropout_rng),
            )?;
            let info = optimizer.step(
                &mut params,
                &mut grads,
                SchedulePosition {
                    completed_steps: step,
                    total_steps,
                },
            )?;
            step += 1;

            let mut meta_updated = false;
            if train_cfg.mode != TrainMode::Baseline && step % meta_state.update_interval == 0 {
                let sample = sample_indices(&mut meta_rng, valid_data.len(), train_cfg.meta_batch_size);
                let valid_batch = valid_data.batch(&sample, model_cfg.hash_dim)?;
                let update = meta_update(
                    model_cfg,
                    &params,
                    &meta_state,
                    &batch,
                    &valid_batch,
                    info.learning_rate,
                )?;
                meta_state.lambda1 = update.lambda1;
                meta_state.lambda2 = update.lambda2;
                meta_updated = true;
            }

            log.records.push(LogRecord::Step {
                step,
                epoch,
                loss_rating: breakdown.rating,
                loss_domain: breakdown.domain,
                loss_lang: breakdown.lang,
                loss_total: breakdown.total,
                lambda1: lambda.0,
                lambda2: lambda.1,
                lr: info.learning_rate,
                meta_updated,
            });
        }

        let (valid_accuracy, valid_macro_f1) =
            validation_metrics(model_cfg, &params, &valid_data)?;
        let improved = best
            .as_ref()
            .map(|(_, f1, _)| valid_macro_f1 > *f1)
            .unwrap_or(true);
        log.records.push(LogRecord::Epoch {
            epoch,
            valid_accuracy,
            valid_macro_f1,
            improved,
        });
        if improved {
            best = Some((epoch, valid_macro_f1, params.clone()));
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= train_cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_valid_f1, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params: best_params,
        log,
        best_epoch,
        best_valid_f1,
        lambda: meta_state.lambda(),
    })
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// k distinct indices when possible (partial Fisher-Yates order), sampling
// with replacement only when the pool is smaller than k.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    if n >= k {
        rand::seq::index::sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.gen_range(0..n)).collect()
    }
}

// Batched evaluation-mode predictions over the whole validation set.
fn validation_metrics(
    model_cfg: &ModelConfig,
    params: &ModelParams,
    data: &Prepared,
) -> Result<(f64, f64)> {
    let predictions = predict_prepared(model_cfg, params, data)?;
    Ok((
        evaluation::accuracy(&data.gold, &predictions)?,
        evaluation::macro_f1(&data.gold, &predictions)?,
    ))
}

fn predict_prepared(
    model_cfg: &ModelConfig,
    params: &ModelParams,
    data: &Prepared,
) -> Result<Vec<Rating>> {
    let mut predictions = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(256) {
        let batch = data.batch(chunk, model_cfg.hash_dim)?;
        predictions.extend(predict_ratings(model_cfg, params, &batch.features)?);
    }
    Ok(predictions)
}

/// Evaluation-mode rating predictions for a whole dataset, batched.
pub fn predict_dataset(
    model_cfg: &ModelConfig,
    params: &ModelParams,
    ds: &Dataset,
) -> Result<Vec<Rating>> {
    ds.require_non_empty("prediction input")?;
    let featurizer = Featurizer::new(model_cfg.hash_dim);
    let data = Prepared::from_dataset(&featurizer, ds);
    predict_prepared(model_cfg, params, &data)
}
