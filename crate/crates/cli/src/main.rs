//! memprobe: train a toy causal LM on synthetic semi-structured records,
//! train soft prompts against the frozen model, and audit how reliably
//! target entities can be extracted.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "memprobe", version, about = "Entity-memorization extraction lab")]
struct Cli {
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the core count).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or ingest) the synthetic corpus.
    GenCorpus {
        #[arg(long)]
        config: PathBuf,
        /// Run directory for outputs.
        #[arg(long)]
        out: PathBuf,
        /// Ingest records from this CSV instead of generating.
        #[arg(long)]
        from_csv: Option<PathBuf>,
    },
    /// Train the language model on the corpus.
    TrainLm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Corpus file (defaults to OUT/corpus/corpus.jsonl).
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train a soft prompt against the frozen checkpoint.
    TrainPrompt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint directory (defaults to OUT/lm/checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Run the configured experiment and write reports.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Evaluate this saved soft-prompt artifact (extraction runs).
        #[arg(long)]
        prompt: Option<PathBuf>,
    },
    /// Consolidate every report under a run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool may already exist.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(DispatchError::Validation(problems)) => {
            eprintln!("configuration invalid ({} problem(s)):", problems.len());
            for p in &problems {
                eprintln!("  - {p}");
            }
            ExitCode::from(1)
        }
        Err(DispatchError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

enum DispatchError {
    Validation(Vec<String>),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for DispatchError {
    fn from(e: anyhow::Error) -> Self {
        DispatchError::Runtime(e)
    }
}

fn load_config(path: &PathBuf, seed_override: Option<u64>) -> Result<RunConfig, DispatchError> {
    let mut config = RunConfig::load(path).map_err(|e| {
        DispatchError::Validation(vec![e.to_string()])
    })?;
    if let Some(seed) = seed_override {
        config.master_seed = seed;
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(DispatchError::Validation(problems));
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), DispatchError> {
    match cli.command {
        Command::GenCorpus { config, out, from_csv } => {
            let config = load_config(&config, cli.seed)?;
            commands::gen_corpus::run(&config, &out, from_csv.as_deref())?;
        }
        Command::TrainLm { config, out, corpus } => {
            let config = load_config(&config, cli.seed)?;
            commands::train_lm::run(&config, &out, corpus.as_deref())?;
        }
        Command::TrainPrompt { config, out, checkpoint, corpus } => {
            let config = load_config(&config, cli.seed)?;
            commands::train_prompt::run(&config, &out, checkpoint.as_deref(), corpus.as_deref())?;
        }
        Command::Audit { config, out, checkpoint, corpus, prompt } => {
            let config = load_config(&config, cli.seed)?;
            commands::audit_cmd::run(
                &config,
                &out,
                checkpoint.as_deref(),
                corpus.as_deref(),
                prompt.as_deref(),
            )?;
        }
        Command::Report { run_dir, out } => {
            commands::report::run(&run_dir, out.as_deref())?;
        }
    }
    Ok(())
}
