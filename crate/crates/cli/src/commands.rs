//! Subcommand implementations.
//!
//! Every command resolves its settings as defaults < config file < flags,
//! then writes the fully resolved values as a JSON snapshot next to its
//! outputs, so any run can be reproduced from the snapshot alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use advsent::corpus::{
    compute_stats, deduplicate, normalize_dataset, read_jsonl, render_stats_table,
    verify_language, write_jsonl, Dataset, Rating, Split, StopwordDetector,
};
use advsent::datagen::{self, GenConfig};
use advsent::evaluation::{build_report, render_table, Aggregation};
use advsent::llmeval::{
    run_eval, CompletionClient, CompletionConfig, EvalSettings,
};
use advsent::model::{read_checkpoint, write_checkpoint, ModelConfig};
use advsent::trainer::{
    predict_dataset, train as run_training, OptimizerConfig, TrainConfig, TrainMode,
};

use crate::overlay::{write_effective_config, EffectiveConfigTarget, Overlay};
use crate::CliError;

type CliResult = Result<(), CliError>;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(advsent::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// prepare

#[derive(Args)]
pub struct PrepareArgs {
    /// Input JSON-lines dataset.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path for the cleaned dataset.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run the built-in stopword language detector and write quality flags.
    #[arg(long)]
    verify_language: bool,
    /// JSON config file (defaults < file < flags).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct PrepareConfig {
    input: PathBuf,
    output: PathBuf,
    verify_language: bool,
}

pub fn prepare(args: PrepareArgs) -> CliResult {
    let overlay = Overlay::load(args.config.as_deref())?;
    let cfg = PrepareConfig {
        input: overlay.require(args.input, "input")?,
        output: overlay.require(args.output, "output")?,
        verify_language: overlay.switch(args.verify_language, "verify_language")?,
    };

    let raw = read_jsonl(&cfg.input)?;
    let normalized = normalize_dataset(&raw);

    let flagged = if cfg.verify_language {
        let flags = verify_language(&normalized, &StopwordDetector);
        let flags_path = sibling(&cfg.output, ".flags.jsonl");
        let file = File::create(&flags_path).map_err(|e| io_error(&flags_path, e))?;
        let mut writer = BufWriter::new(file);
        for flag in &flags {
            serde_json::to_writer(&mut writer, flag)
                .map_err(|e| CliError::Config(format!("cannot serialize flag: {e}")))?;
            writer.write_all(b"\n").map_err(|e| io_error(&flags_path, e))?;
        }
        writer.flush().map_err(|e| io_error(&flags_path, e))?;
        println!("flags written to {}", flags_path.display());
        flags.len()
    } else {
        0
    };

    let (clean, removed) = deduplicate(normalized);
    write_jsonl(&clean, &cfg.output)?;
    write_effective_config(EffectiveConfigTarget::File(&cfg.output), "prepare", &cfg)?;

    println!(
        "{} records written to {} ({removed} duplicate(s) removed, {flagged} record(s) flagged)",
        clean.len(),
        cfg.output.display()
    );
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

// ---------------------------------------------------------------------------
// generate

#[derive(Args)]
pub struct GenerateArgs {
    /// Output path for the generated JSON-lines dataset.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Records per (language, domain, split) cell.
    #[arg(long)]
    per_cell: Option<usize>,
    #[arg(long)]
    sentiment_vocab: Option<usize>,
    #[arg(long)]
    surface_vocab: Option<usize>,
    #[arg(long)]
    domain_vocab: Option<usize>,
    /// Domain-token/rating correlation on train and valid splits.
    #[arg(long, allow_hyphen_values = true)]
    rho_train: Option<f64>,
    /// Domain-token/rating correlation on the test split.
    #[arg(long, allow_hyphen_values = true)]
    rho_test: Option<f64>,
    #[arg(long)]
    mean_len_it: Option<f64>,
    #[arg(long)]
    mean_len_ro: Option<f64>,
    #[arg(long)]
    length_dispersion: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct GenerateConfig {
    output: PathBuf,
    #[serde(flatten)]
    gen: GenConfig,
}

pub fn generate(args: GenerateArgs) -> CliResult {
    let overlay = Overlay::load(args.config.as_deref())?;
    let defaults = GenConfig::default();
    let cfg = GenerateConfig {
        output: overlay.require(args.output, "output")?,
        gen: GenConfig {
            seed: overlay.get(args.seed, "seed", defaults.seed)?,
            per_cell: overlay.get(args.per_cell, "per_cell", defaults.per_cell)?,
            sentiment_vocab: overlay.get(
                args.sentiment_vocab,
                "sentiment_vocab",
                defaults.sentiment_vocab,
            )?,
            surface_vocab: overlay.get(args.surface_vocab, "surface_vocab", defaults.surface_vocab)?,
            domain_vocab: overlay.get(args.domain_vocab, "domain_vocab", defaults.domain_vocab)?,
            rho_train: overlay.get(args.rho_train, "rho_train", defaults.rho_train)?,
            rho_test: overlay.get(args.rho_test, "rho_test", defaults.rho_test)?,
            mean_len_it: overlay.get(args.mean_len_it, "mean_len_it", defaults.mean_len_it)?,
            mean_len_ro: overlay.get(args.mean_len_ro, "mean_len_ro", defaults.mean_len_ro)?,
            length_dispersion: overlay.get(
                args.length_dispersion,
                "length_dispersion",
                defaults.length_dispersion,
            )?,
        },
    };

    let ds = datagen::generate(&cfg.gen)?;
    write_jsonl(&ds, &cfg.output)?;
    write_effective_config(EffectiveConfigTarget::File(&cfg.output), "generate", &cfg)?;
    println!("{} records written to {}", ds.len(), cfg.output.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
pub struct TrainArgs {
    /// JSON-lines file providing the training split.
    #[arg(long)]
    train: Option<PathBuf>,
    /// JSON-lines file providing the validation split.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Output directory for checkpoint, log, and config snapshot.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// baseline | loss-reversal | gradient-reversal.
    #[arg(long)]
    mode: Option<TrainMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    warmup_ratio: Option<f64>,
    /// Global gradient-norm clip.
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    hash_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    lambda1_init: Option<f64>,
    #[arg(long)]
    lambda2_init: Option<f64>,
    #[arg(long)]
    meta_lr: Option<f64>,
    #[arg(long)]
    meta_interval: Option<u64>,
    #[arg(long)]
    meta_batch_size: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct ResolvedTrainConfig {
    train: PathBuf,
    valid: PathBuf,
    out_dir: PathBuf,
    mode: TrainMode,
    seed: u64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    learning_rate: f64,
    weight_decay: f64,
    warmup_ratio: f64,
    grad_clip: f64,
    dropout: f64,
    hash_dim: usize,
    hidden_dim: usize,
    lambda1_init: f64,
    lambda2_init: f64,
    meta_lr: f64,
    meta_interval: u64,
    meta_batch_size: usize,
}

pub fn train(args: TrainArgs) -> CliResult {
    let overlay = Overlay::load(args.config.as_deref())?;
    let train_defaults = TrainConfig::default();
    let optimizer_defaults = OptimizerConfig::default();
    let model_defaults = ModelConfig::default();

    let cfg = ResolvedTrainConfig {
        train: overlay.require(args.train, "train")?,
        valid: overlay.require(args.valid, "valid")?,
        out_dir: overlay.require(args.out_dir, "out_dir")?,
        mode: overlay.get(args.mode, "mode", train_defaults.mode)?,
        seed: overlay.get(args.seed, "seed", train_defaults.seed)?,
        batch_size: overlay.get(args.batch_size, "batch_size", train_defaults.batch_size)?,
        max_epochs: overlay.get(args.max_epochs, "max_epochs", train_defaults.max_epochs)?,
        patience: overlay.get(args.patience, "patience", train_defaults.patience)?,
        learning_rate: overlay.get(
            args.learning_rate,
            "learning_rate",
            optimizer_defaults.learning_rate,
        )?,
        weight_decay: overlay.get(
            args.weight_decay,
            "weight_decay",
            optimizer_defaults.weight_decay,
        )?,
        warmup_ratio: overlay.get(
            args.warmup_ratio,
            "warmup_ratio",
            optimizer_defaults.warmup_ratio,
        )?,
        grad_clip: overlay.get(args.grad_clip, "grad_clip", optimizer_defaults.max_grad_norm)?,
        dropout: overlay.get(args.dropout, "dropout", model_defaults.dropout)?,
        hash_dim: overlay.get(args.hash_dim, "hash_dim", model_defaults.hash_dim)?,
        hidden_dim: overlay.get(args.hidden_dim, "hidden_dim", model_defaults.hidden_dim)?,
        lambda1_init: overlay.get(args.lambda1_init, "lambda1_init", train_defaults.lambda_init.0)?,
        lambda2_init: overlay.get(args.lambda2_init, "lambda2_init", train_defaults.lambda_init.1)?,
        meta_lr: overlay.get(args.meta_lr, "meta_lr", train_defaults.meta_lr)?,
        meta_interval: overlay.get(args.meta_interval, "meta_interval", train_defaults.meta_interval)?,
        meta_batch_size: overlay.get(
            args.meta_batch_size,
            "meta_batch_size",
            train_defaults.meta_batch_size,
        )?,
    };

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
    write_effective_config(EffectiveConfigTarget::Dir(&cfg.out_dir), "train", &cfg)?;

    let train_ds = load_split(&cfg.train, Split::Train)?;
    let valid_ds = load_split(&cfg.valid, Split::Valid)?;

    let model_cfg = ModelConfig {
        hash_dim: cfg.hash_dim,
        hidden_dim: cfg.hidden_dim,
        dropout: cfg.dropout,
    };
    let train_cfg = TrainConfig {
        mode: cfg.mode,
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        seed: cfg.seed,
        optimizer: OptimizerConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            warmup_ratio: cfg.warmup_ratio,
            max_grad_norm: cfg.grad_clip,
            ..OptimizerConfig::default()
        },
        lambda_init: (cfg.lambda1_init, cfg.lambda2_init),
        meta_lr: cfg.meta_lr,
        meta_interval: cfg.meta_interval,
        meta_batch_size: cfg.meta_batch_size,
    };

    let outcome = run_training(&model_cfg, &train_cfg, &train_ds, &valid_ds)?;

    let checkpoint_path = cfg.out_dir.join("checkpoint.bin");
    write_checkpoint(&checkpoint_path, &model_cfg, &outcome.params)?;
    let log_path = cfg.out_dir.join("train-log.jsonl");
    let file = File::create(&log_path).map_err(|e| io_error(&log_path, e))?;
    let mut writer = BufWriter::new(file);
    outcome
        .log
        .write_jsonl(&mut writer)
        .map_err(|e| io_error(&log_path, e))?;
    writer.flush().map_err(|e| io_error(&log_path, e))?;

    println!(
        "best epoch {} (validation macro-F1 {:.2}), final lambda = ({:.4}, {:.4})",
        outcome.best_epoch, outcome.best_valid_f1, outcome.lambda.0, outcome.lambda.1
    );
    println!("checkpoint: {}", checkpoint_path.display());
    println!("log: {}", log_path.display());
    Ok(())
}

// Loads a JSON-lines file and keeps the records of one split. Errors if
// the file has no records for that split.
fn load_split(path: &Path, split: Split) -> Result<Dataset, CliError> {
    let ds = read_jsonl(path)?;
    let filtered = ds.split(split);
    if filtered.is_empty() {
        return Err(CliError::Core(advsent::Error::EmptyInput(format!(
            "{} has no `{}` records",
            path.display(),
            split.label()
        ))));
    }
    Ok(filtered)
}

fn load_optionally_filtered(path: &Path, split_flag: &str) -> Result<Dataset, CliError> {
    let ds = read_jsonl(path)?;
    if split_flag == "all" {
        return Ok(ds);
    }
    let split = match split_flag {
        "train" => Split::Train,
        "valid" => Split::Valid,
        "test" => Split::Test,
        other => {
            return Err(CliError::Config(format!(
                "split must be train, valid, test, or all; got `{other}`"
            )))
        }
    };
    let filtered = ds.split(split);
    if filtered.is_empty() {
        return Err(CliError::Core(advsent::Error::EmptyInput(format!(
            "{} has no `{}` records",
            path.display(),
            split.label()
        ))));
    }
    Ok(filtered)
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// JSON-lines dataset to evaluate on.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Which split of the data file to use (train|valid|test|all).
    #[arg(long)]
    split: Option<String>,
    /// Output path for the JSON metrics report.
    #[arg(long)]
    output: Option<PathBuf>,
    /// pooled | cell-average aggregation for domain/language columns.
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "pooled" => Ok(Aggregation::Pooled),
        "cell-average" => Ok(Aggregation::CellAverage),
        other => Err(format!("expected pooled or cell-average, got `{other}`")),
    }
}

#[derive(Serialize, Deserialize)]
struct EvaluateConfig {
    checkpoint: PathBuf,
    data: PathBuf,
    split: String,
    output: PathBuf,
    aggregation: Aggregation,
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    let overlay = Overlay::load(args.config.as_deref())?;
    let cfg = EvaluateConfig {
        checkpoint: overlay.require(args.checkpoint, "checkpoint")?,
        data: overlay.require(args.data, "data")?,
        split: overlay.get(args.split, "split", "test".to_string())?,
        output: overlay.require(args.output, "output")?,
        aggregation: overlay.get(args.aggregation, "aggregation", Aggregation::Pooled)?,
    };

    let (model_cfg, params) = read_checkpoint(&cfg.checkpoint)?;
    let ds = load_optionally_filtered(&cfg.data, &cfg.split)?;
    let predictions = predict_dataset(&model_cfg, &params, &ds)?;
    let optional: Vec<Option<Rating>> = predictions.into_iter().map(Some).collect();
    let report = build_report(&ds.records, &optional, cfg.aggregation)?;

    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))?;
    std::fs::write(&cfg.output, text + "\n").map_err(|e| io_error(&cfg.output, e))?;
    write_effective_config(EffectiveConfigTarget::File(&cfg.output), "evaluate", &cfg)?;

    print!("{}", render_table(&report));
    println!("report: {}", cfg.output.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// stats

#[derive(Args)]
pub struct StatsArgs {
    /// JSON-lines dataset to summarize.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path for the JSON statistics document.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct StatsConfig {
    input: PathBuf,
    output: PathBuf,
}

pub fn stats(args: StatsArgs) -> CliResult {
    let overlay = Overlay::load(args.config.as_deref())?;
    let cfg = StatsConfig {
        input: overlay.require(args.input, "input")?,
        output: overlay.require(args.output, "output")?,
    };
    let ds = read_jsonl(&cfg.input)?;
    let stats = compute_stats(&ds)?;
    let text = serde_json::to_string_pretty(&stats)
        .map_err(|e| CliError::Config(format!("cannot serialize stats: {e}")))?;
    std::fs::write(&cfg.output, text + "\n").map_err(|e| io_error(&cfg.output, e))?;
    write_effective_config(EffectiveConfigTarget::File(&cfg.output), "stats", &cfg)?;
    print!("{}", render_stats_table(&stats));
    println!("stats: {}", cfg.output.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// llm-eval

#[derive(Args)]
pub struct LlmEvalArgs {
    /// JSON-lines dataset to evaluate (test split by default).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Which split of the data file to evaluate (train|valid|test|all).
    #[arg(long)]
    split: Option<String>,
    /// Source of in-context examples (train split of this file).
    #[arg(long)]
    shot_source: Option<PathBuf>,
    /// Completion endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model identifier forwarded to the endpoint.
    #[arg(long)]
    model: Option<String>,
    /// In-context examples per prompt (0 = zero-shot template).
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_new_tokens: Option<u32>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    backoff_ms: Option<u64>,
    /// Maximum in-flight requests.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Output directory for run log, report, and config snapshot.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct LlmEvalConfig {
    data: PathBuf,
    split: String,
    shot_source: Option<PathBuf>,
    endpoint: String,
    model: String,
    shots: usize,
    seed: u64,
    temperature: f64,
    max_new_tokens: u32,
    timeout_ms: u64,
    max_retries: u32,
    backoff_ms: u64,
    concurrency: usize,
    out_dir: PathBuf,
}

pub fn llm_eval(args: LlmEvalArgs) -> CliResult {
    let overlay = Overlay::load(args.config.as_deref())?;
    let completion_defaults = CompletionConfig::new("", "");
    let cfg = LlmEvalConfig {
        data: overlay.require(args.data, "data")?,
        split: overlay.get(args.split, "split", "test".to_string())?,
        shot_source: overlay.get(args.shot_source.map(Some), "shot_source", None)?,
        endpoint: overlay.require(args.endpoint, "endpoint")?,
        model: overlay.require(args.model, "model")?,
        shots: overlay.get(args.shots, "shots", 0)?,
        seed: overlay.get(args.seed, "seed", 42)?,
        temperature: overlay.get(args.temperature, "temperature", completion_defaults.temperature)?,
        max_new_tokens: overlay.get(
            args.max_new_tokens,
            "max_new_tokens",
            completion_defaults.max_new_tokens,
        )?,
        timeout_ms: overlay.get(args.timeout_ms, "timeout_ms", completion_defaults.timeout_ms)?,
        max_retries: overlay.get(args.max_retries, "max_retries", completion_defaults.max_retries)?,
        backoff_ms: overlay.get(args.backoff_ms, "backoff_ms", completion_defaults.backoff_ms)?,
        concurrency: overlay.get(args.concurrency, "concurrency", 1)?,
        out_dir: overlay.require(args.out_dir, "out_dir")?,
    };

    if cfg.shots > 0 && cfg.shot_source.is_none() {
        return Err(CliError::Config(
            "--shot-source is required when --shots > 0".to_string(),
        ));
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
    write_effective_config(EffectiveConfigTarget::Dir(&cfg.out_dir), "llm-eval", &cfg)?;

    let test_ds = load_optionally_filtered(&cfg.data, &cfg.split)?;
    let shot_ds = match &cfg.shot_source {
        Some(path) => load_split(path, Split::Train)?,
        None => Dataset::new(Vec::new(), "unused"),
    };

    let client = CompletionClient::new(CompletionConfig {
        endpoint: cfg.endpoint.clone(),
        model: cfg.model.clone(),
        temperature: cfg.temperature,
        max_new_tokens: cfg.max_new_tokens,
        timeout_ms: cfg.timeout_ms,
        max_retries: cfg.max_retries,
        backoff_ms: cfg.backoff_ms,
    })?;
    let settings = EvalSettings {
        shots: cfg.shots,
        seed: cfg.seed,
        concurrency: cfg.concurrency,
    };
    let outcome = run_eval(&client, &test_ds, &shot_ds, &settings)?;

    let log_path = cfg.out_dir.join("run-log.jsonl");
    let file = File::create(&log_path).map_err(|e| io_error(&log_path, e))?;
    let mut writer = BufWriter::new(file);
    for record in &outcome.records {
        serde_json::to_writer(&mut writer, record)
            .map_err(|e| CliError::Config(format!("cannot serialize run log: {e}")))?;
        writer.write_all(b"\n").map_err(|e| io_error(&log_path, e))?;
    }
    writer.flush().map_err(|e| io_error(&log_path, e))?;

    let report = build_report(&test_ds.records, &outcome.predictions, Aggregation::Pooled)?;
    let report_path = cfg.out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))?;
    std::fs::write(&report_path, text + "\n").map_err(|e| io_error(&report_path, e))?;

    print!("{}", render_table(&report));
    println!(
        "{} queries, {} parse failure(s); run log: {}",
        outcome.records.len(),
        outcome.parse_failures,
        log_path.display()
    );
    Ok(())
}
