use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use seqtta::commands::{self, EvalMode};
use seqtta::config::ExperimentConfig;
use seqtta::{Error, Result};

/// Test-time augmentation experiments for sequential recommenders.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `global_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `parallel` (worker threads).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Base,
    Tta,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, split and store the dataset.
    Prepare,
    /// Train the model on the prepared dataset.
    Train,
    /// Evaluate the trained model.
    Eval {
        #[arg(long, value_enum, default_value = "base")]
        mode: Mode,
    },
    /// Evaluate with test-time augmentation.
    TtaEval,
    /// Evaluate every point of the configured sweep grid.
    Sweep,
    /// Cosine similarity between augmented and original representations.
    AnalyzeSimilarity,
    /// Inference time per operator across catalog sizes.
    AnalyzeTiming,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config is required"))?;
    let mut cfg = ExperimentConfig::read(path)?;
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(p) = cli.parallel {
        cfg.parallel = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build_global()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Prepare => commands::prepare(&cfg).map(drop),
        Command::Train => commands::train_model(&cfg).map(drop),
        Command::Eval { mode: Mode::Base } => commands::evaluate_model(&cfg, EvalMode::Base).map(drop),
        Command::Eval { mode: Mode::Tta } | Command::TtaEval => {
            commands::evaluate_model(&cfg, EvalMode::Tta).map(drop)
        }
        Command::Sweep => commands::run_sweep(&cfg).map(drop),
        Command::AnalyzeSimilarity => commands::analyze_similarity(&cfg).map(drop),
        Command::AnalyzeTiming => commands::analyze_timing(&cfg).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
