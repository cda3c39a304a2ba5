use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use ligram::corpus::PrepareOptions;
use ligram::graph::{GraphConfig, MissingEmbeddingPolicy};
use ligram::model::{ContrastiveScope, Hyperparams, SubgraphSelection};

/// Flat key-value configuration, read from a TOML file. Every key is
/// optional; command-line flags win over file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub morpheme_emb: Option<PathBuf>,
    pub entity_emb: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub hidden: Option<usize>,
    pub window: Option<usize>,
    pub delta: Option<f64>,
    pub dropout: Option<f64>,
    pub lambda: Option<f64>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub max_epochs: Option<usize>,
    pub eval_every: Option<usize>,
    pub temperature: Option<f64>,
    pub entity_min_sim: Option<f64>,
    pub grad_clip: Option<f64>,
    pub use_morpheme: Option<bool>,
    pub use_pos: Option<bool>,
    pub use_entity: Option<bool>,
    pub use_semcon: Option<bool>,
    pub contrastive_scope: Option<ContrastiveScope>,
    pub per_class: Option<usize>,
    pub min_freq: Option<usize>,
    pub deduplicate: Option<bool>,
    pub morpheme_dim: Option<usize>,
    pub missing_embedding: Option<MissingEmbeddingPolicy>,
    pub log: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the keys below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub morpheme_emb: Option<PathBuf>,
    #[arg(long)]
    pub entity_emb: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub entity_min_sim: Option<f64>,
    /// Clip the global gradient norm to this value.
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub no_morpheme: bool,
    #[arg(long)]
    pub no_pos: bool,
    #[arg(long)]
    pub no_entity: bool,
    /// Train without the contrastive term (lambda = 0).
    #[arg(long)]
    pub no_semcon: bool,
    #[arg(long, value_parser = parse_scope)]
    pub contrastive_scope: Option<ContrastiveScope>,
    /// Labeled documents sampled per class when the corpus has no splits.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Drop morphemes occurring fewer times than this.
    #[arg(long)]
    pub min_freq: Option<usize>,
    /// Required morpheme embedding width.
    #[arg(long)]
    pub morpheme_dim: Option<usize>,
}

fn parse_scope(s: &str) -> std::result::Result<ContrastiveScope, String> {
    s.parse()
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct Settings {
    pub corpus: Option<PathBuf>,
    pub morpheme_emb: Option<PathBuf>,
    pub entity_emb: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub hyper: Hyperparams,
    pub prepare: PrepareOptions,
    pub graph: GraphConfig,
    pub log: Option<String>,
}

impl Settings {
    pub fn require_corpus(&self) -> Result<&Path> {
        self.corpus.as_deref().context("missing --corpus")
    }

    pub fn require_morpheme_emb(&self) -> Result<&Path> {
        self.morpheme_emb.as_deref().context("missing --morpheme-emb")
    }

    pub fn require_entity_emb(&self) -> Result<&Path> {
        self.entity_emb.as_deref().context("missing --entity-emb")
    }

    pub fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().context("missing --out")
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn resolve(args: &RunArgs) -> Result<Settings> {
    let file = match &args.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    let d = Hyperparams::default();
    let subgraphs = SubgraphSelection {
        morpheme: !args.no_morpheme && file.use_morpheme.unwrap_or(true),
        pos: !args.no_pos && file.use_pos.unwrap_or(true),
        entity: !args.no_entity && file.use_entity.unwrap_or(true),
    };
    let use_semcon = !args.no_semcon && file.use_semcon.unwrap_or(true);
    let lambda = args.lambda.or(file.lambda).unwrap_or(d.lambda);
    let hyper = Hyperparams {
        hidden: args.hidden.or(file.hidden).unwrap_or(d.hidden),
        window: args.window.or(file.window).unwrap_or(d.window),
        delta: args.delta.or(file.delta).unwrap_or(d.delta),
        dropout: args.dropout.or(file.dropout).unwrap_or(d.dropout),
        lambda: if use_semcon { lambda } else { 0.0 },
        lr: args.lr.or(file.lr).unwrap_or(d.lr),
        weight_decay: args.weight_decay.or(file.weight_decay).unwrap_or(d.weight_decay),
        max_epochs: args.max_epochs.or(file.max_epochs).unwrap_or(d.max_epochs),
        eval_every: args.eval_every.or(file.eval_every).unwrap_or(d.eval_every),
        entity_min_sim: args.entity_min_sim.or(file.entity_min_sim).unwrap_or(d.entity_min_sim),
        temperature: args.temperature.or(file.temperature).unwrap_or(d.temperature),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        subgraphs,
        contrastive_scope: args.contrastive_scope.or(file.contrastive_scope).unwrap_or_default(),
        grad_clip: args.grad_clip.or(file.grad_clip),
    };
    if hyper.subgraphs.count() == 0 {
        bail!("at least one of the morpheme, pos and entity subgraphs must stay enabled");
    }
    hyper.validate()?;
    let prepare = PrepareOptions {
        deduplicate: file.deduplicate.unwrap_or(true),
        min_freq: args.min_freq.or(file.min_freq).unwrap_or(PrepareOptions::default().min_freq),
        per_class: args.per_class.or(file.per_class).unwrap_or(PrepareOptions::default().per_class),
        seed: hyper.seed,
    };
    let graph = GraphConfig {
        window: hyper.window,
        entity_min_sim: hyper.entity_min_sim,
        morpheme_dim: args.morpheme_dim.or(file.morpheme_dim),
        missing_embedding: file.missing_embedding.unwrap_or_default(),
    };
    Ok(Settings {
        corpus: args.corpus.clone().or(file.corpus),
        morpheme_emb: args.morpheme_emb.clone().or(file.morpheme_emb),
        entity_emb: args.entity_emb.clone().or(file.entity_emb),
        out: args.out.clone().or(file.out),
        hyper,
        prepare,
        graph,
        log: file.log,
    })
}
