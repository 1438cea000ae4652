//! `advsent`: dataset preparation, synthetic generation, adversarial
//! training, evaluation, corpus statistics, and LLM few-shot benchmarking
//! behind one reproducible command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error (flags/config file),
//! 3 data error (malformed or empty input), 4 runtime error (I/O,
//! training, endpoint).

mod commands;
mod overlay;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(advsent::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<advsent::Error> for CliError {
    fn from(e: advsent::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        use advsent::Error;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::Parse { .. } | Error::Schema { .. } | Error::EmptyInput(_) => 3,
                Error::InvalidArgument(_) => 2,
                _ => 4,
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "advsent",
    version,
    about = "Cross-lingual, cross-domain sentiment classification with multi-target adversarial training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, optionally language-verify, and deduplicate a dataset.
    Prepare(commands::PrepareArgs),
    /// Generate a synthetic dataset with a controllable domain confound.
    Generate(commands::GenerateArgs),
    /// Train a model and write checkpoint plus training log.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint on a dataset and write a metrics report.
    Evaluate(commands::EvaluateArgs),
    /// Compute corpus statistics.
    Stats(commands::StatsArgs),
    /// Benchmark a completion endpoint with few-shot prompts.
    LlmEval(commands::LlmEvalArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => commands::prepare(args),
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Stats(args) => commands::stats(args),
        Command::LlmEval(args) => commands::llm_eval(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
