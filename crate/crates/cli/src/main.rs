mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use ligram::corpus::{Split, SyntheticSpec};

use crate::config::{resolve, RunArgs};

/// Hierarchical heterogeneous graph classifier for short texts.
#[derive(Debug, Parser)]
#[command(name = "ligram", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the corpus and embedding files and print corpus statistics.
    Validate(RunArgs),
    /// Build the three subgraphs and write them to --out.
    BuildGraphs(RunArgs),
    /// Train a model; writes checkpoint.lgck, history.jsonl and metrics.
    Train(RunArgs),
    /// Score a checkpoint on one split.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Train the eight subgraph/contrastive configurations and tabulate them.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds; defaults to --seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Write a synthetic corpus and matching embedding files.
    Synth {
        /// TOML file with generator settings.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        docs_per_class: Option<usize>,
        #[arg(long)]
        vocab_per_class: Option<usize>,
        #[arg(long)]
        overlap: Option<f64>,
        #[arg(long)]
        entity_overlap: Option<f64>,
        #[arg(long)]
        embedding_dim: Option<usize>,
    },
    /// Compare analytic and numeric gradients of the full loss on a small
    /// built-in corpus.
    Gradcheck {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn init_logging(default: Option<&str>) {
    let env = env_logger::Env::new().filter_or("LIGRAM_LOG", default.unwrap_or("info"));
    let _ = env_logger::Builder::from_env(env).try_init();
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(args) => {
            let s = resolve(&args)?;
            init_logging(s.log.as_deref());
            commands::validate(&s)
        }
        Command::BuildGraphs(args) => {
            let s = resolve(&args)?;
            init_logging(s.log.as_deref());
            commands::build_graphs_cmd(&s)
        }
        Command::Train(args) => {
            let s = resolve(&args)?;
            init_logging(s.log.as_deref());
            commands::train_cmd(&s)
        }
        Command::Evaluate { run, checkpoint, split } => {
            let s = resolve(&run)?;
            init_logging(s.log.as_deref());
            commands::evaluate_cmd(&s, &checkpoint, split)
        }
        Command::Ablate { run, seeds } => {
            let s = resolve(&run)?;
            init_logging(s.log.as_deref());
            commands::ablate_cmd(&s, &seeds)
        }
        Command::Synth {
            spec,
            seed,
            out,
            classes,
            docs_per_class,
            vocab_per_class,
            overlap,
            entity_overlap,
            embedding_dim,
        } => {
            init_logging(None);
            let mut s = match spec {
                Some(p) => commands::read_synth_spec(&p)?,
                None => SyntheticSpec::default(),
            };
            s.classes = classes.unwrap_or(s.classes);
            s.docs_per_class = docs_per_class.unwrap_or(s.docs_per_class);
            s.vocab_per_class = vocab_per_class.unwrap_or(s.vocab_per_class);
            s.overlap = overlap.unwrap_or(s.overlap);
            s.entity_overlap = entity_overlap.unwrap_or(s.entity_overlap);
            s.embedding_dim = embedding_dim.unwrap_or(s.embedding_dim);
            commands::synth_cmd(&s, seed, &out)
        }
        Command::Gradcheck { run, step, tolerance } => {
            let hidden = run.hidden.unwrap_or(4);
            let s = resolve(&run)?;
            init_logging(s.log.as_deref());
            let hyper = ligram::model::Hyperparams { hidden, ..s.hyper };
            commands::gradcheck_cmd(&hyper, step, tolerance)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
