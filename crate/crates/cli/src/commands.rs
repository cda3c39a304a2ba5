use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use ligram::corpus::{
    generate_synthetic_corpus, load_corpus, prepare_corpus, Corpus, PrepareOptions, Split, SyntheticSpec,
};
use ligram::embedding::EmbeddingTable;
use ligram::graph::{build_graphs, graph_stats, GraphBundle, GraphConfig, MissingEmbeddingPolicy};
use ligram::model::{Checkpoint, Hyperparams, ModelParameters, SubgraphSelection};
use ligram::trainer::{check_model_gradients, evaluate, train, Objective, TrainTargets};

use crate::config::Settings;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::read(path).with_context(|| format!("reading {}", path.display()))
}

struct Inputs {
    corpus: Corpus,
    morphemes: EmbeddingTable,
    entities: EmbeddingTable,
}

fn load_inputs(settings: &Settings, prepare: &PrepareOptions) -> Result<Inputs> {
    let corpus_path = settings.require_corpus()?;
    let raw = load_corpus(corpus_path).with_context(|| format!("loading {}", corpus_path.display()))?;
    let corpus = prepare_corpus(raw, prepare).with_context(|| format!("preparing {}", corpus_path.display()))?;
    let morph_path = settings.require_morpheme_emb()?;
    let morphemes = read_embeddings(morph_path)?;
    if let Some(d) = settings.graph.morpheme_dim {
        if morphemes.dim() != d {
            bail!("{}: embedding dim {} but {} expected", morph_path.display(), morphemes.dim(), d);
        }
    }
    let entities = read_embeddings(settings.require_entity_emb()?)?;
    Ok(Inputs {
        corpus,
        morphemes,
        entities,
    })
}

fn build(settings: &Settings, prepare: &PrepareOptions, graph: &GraphConfig) -> Result<(Corpus, GraphBundle)> {
    let inputs = load_inputs(settings, prepare)?;
    let bundle = build_graphs(&inputs.corpus, &inputs.morphemes, &inputs.entities, graph).context("building graphs")?;
    Ok((inputs.corpus, bundle))
}

fn out_dir(settings: &Settings) -> Result<PathBuf> {
    let dir = settings.require_out()?.to_path_buf();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn validate(settings: &Settings) -> Result<()> {
    let inputs = load_inputs(settings, &settings.prepare)?;
    let morph_path = settings.require_morpheme_emb()?;
    let entity_path = settings.require_entity_emb()?;
    if settings.graph.missing_embedding == MissingEmbeddingPolicy::Error {
        if let Some(t) = inputs
            .corpus
            .morpheme_vocab
            .tokens()
            .iter()
            .find(|t| inputs.morphemes.get(t).is_none())
        {
            bail!("{}: no vector for morpheme `{t}`", morph_path.display());
        }
    }
    for t in inputs.corpus.entity_vocab.tokens() {
        match inputs.entities.get(t) {
            None => bail!("{}: no vector for entity `{t}`", entity_path.display()),
            Some(row) if row.iter().all(|&v| v == 0.0) => {
                bail!("{}: zero vector for entity `{t}`", entity_path.display())
            }
            Some(_) => {}
        }
    }
    let s = inputs.corpus.stats();
    let mut out = std::io::stdout().lock();
    writeln!(out, "| #texts | avg. length | #classes | #train | #morphemes | #entities | #POS |")?;
    writeln!(out, "|---|---|---|---|---|---|---|")?;
    writeln!(
        out,
        "| {} | {:.2} | {} | {} | {} | {} | {} |",
        s.texts, s.avg_length, s.classes, s.train, s.morphemes, s.entities, s.pos
    )?;
    writeln!(
        out,
        "morpheme embeddings: {} rows, dim {}; entity embeddings: {} rows, dim {}",
        inputs.morphemes.len(),
        inputs.morphemes.dim(),
        inputs.entities.len(),
        inputs.entities.dim()
    )?;
    Ok(())
}

pub fn build_graphs_cmd(settings: &Settings) -> Result<()> {
    let dir = out_dir(settings)?;
    let (corpus, bundle) = build(settings, &settings.prepare, &settings.graph)?;
    bundle.write(&dir)?;
    let stats = graph_stats(&bundle, corpus.len(), settings.hyper.hidden);
    write_json(&dir.join("stats.json"), &stats)?;
    let mut out = std::io::stdout().lock();
    for g in &stats.subgraphs {
        writeln!(out, "{}: {} nodes, {} edges, feature dim {}", g.kind, g.nodes, g.edges, g.feature_dim)?;
    }
    writeln!(out, "documents: {}; estimated ops per pass: {}", stats.documents, stats.total_ops_display)?;
    Ok(())
}

pub fn train_cmd(settings: &Settings) -> Result<()> {
    let dir = out_dir(settings)?;
    let (corpus, bundle) = build(settings, &settings.prepare, &settings.graph)?;
    let hyper = &settings.hyper;
    let run = train(&corpus, &bundle, hyper)?;
    let checkpoint = run.checkpoint();
    checkpoint.write(&dir.join("checkpoint.lgck"))?;

    let mut history = BufWriter::new(File::create(dir.join("history.jsonl"))?);
    for record in &run.history {
        serde_json::to_writer(&mut history, record)?;
        writeln!(history)?;
    }
    history.flush()?;

    info!("best validation accuracy {:.4} at epoch {}", run.best_val_accuracy, run.best_epoch);
    let split = if corpus.indices_in(Split::Test).is_empty() {
        Split::Val
    } else {
        Split::Test
    };
    let mut report = evaluate(&checkpoint.params, hyper, &corpus, &bundle, split)?;
    report.epoch = Some(run.best_epoch);
    write_json(&dir.join(format!("metrics_{split}.json")), &report)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

pub fn evaluate_cmd(settings: &Settings, checkpoint_path: &Path, split: Split) -> Result<()> {
    let checkpoint =
        Checkpoint::read(checkpoint_path).with_context(|| format!("reading {}", checkpoint_path.display()))?;
    let hyper = &checkpoint.hyper;
    let prepare = PrepareOptions {
        seed: hyper.seed,
        ..settings.prepare.clone()
    };
    let graph = GraphConfig {
        window: hyper.window,
        entity_min_sim: hyper.entity_min_sim,
        ..settings.graph.clone()
    };
    let (corpus, bundle) = build(settings, &prepare, &graph)?;
    let report = evaluate(&checkpoint.params, hyper, &corpus, &bundle, split)?;
    let dir = match &settings.out {
        Some(d) => d.clone(),
        None => checkpoint_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir).ok();
    write_json(&dir.join(format!("metrics_{split}.json")), &report)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

struct AblationConfig {
    name: &'static str,
    slug: &'static str,
    subgraphs: SubgraphSelection,
    semcon: bool,
}

fn ablation_configs() -> Vec<AblationConfig> {
    let sel = |morpheme, pos, entity| SubgraphSelection { morpheme, pos, entity };
    vec![
        AblationConfig { name: "morpheme", slug: "morpheme", subgraphs: sel(true, false, false), semcon: true },
        AblationConfig { name: "pos", slug: "pos", subgraphs: sel(false, true, false), semcon: true },
        AblationConfig { name: "entity", slug: "entity", subgraphs: sel(false, false, true), semcon: true },
        AblationConfig { name: "morpheme+pos", slug: "morpheme_pos", subgraphs: sel(true, true, false), semcon: true },
        AblationConfig { name: "morpheme+entity", slug: "morpheme_entity", subgraphs: sel(true, false, true), semcon: true },
        AblationConfig { name: "pos+entity", slug: "pos_entity", subgraphs: sel(false, true, true), semcon: true },
        AblationConfig { name: "w/o SemCon", slug: "wo_semcon", subgraphs: sel(true, true, true), semcon: false },
        AblationConfig { name: "full", slug: "full", subgraphs: sel(true, true, true), semcon: true },
    ]
}

#[derive(Debug, Serialize)]
struct AblationRow {
    config: String,
    subgraphs: Vec<String>,
    lambda: f64,
    seeds: Vec<u64>,
    accuracy: Vec<f64>,
    macro_f1: Vec<f64>,
    mean_accuracy: f64,
    mean_macro_f1: f64,
}

pub fn ablate_cmd(settings: &Settings, seeds: &[u64]) -> Result<()> {
    let dir = out_dir(settings)?;
    let seeds: Vec<u64> = if seeds.is_empty() {
        vec![settings.hyper.seed]
    } else {
        seeds.to_vec()
    };
    let configs = ablation_configs();
    let mut rows: Vec<AblationRow> = configs
        .iter()
        .map(|c| AblationRow {
            config: c.name.to_string(),
            subgraphs: c.subgraphs.kinds().iter().map(|k| k.as_str().to_string()).collect(),
            lambda: if c.semcon { settings.hyper.lambda } else { 0.0 },
            seeds: seeds.clone(),
            accuracy: Vec::new(),
            macro_f1: Vec::new(),
            mean_accuracy: 0.0,
            mean_macro_f1: 0.0,
        })
        .collect();

    for &seed in &seeds {
        let prepare = PrepareOptions {
            seed,
            ..settings.prepare.clone()
        };
        let (corpus, bundle) = build(settings, &prepare, &settings.graph)?;
        let split = if corpus.indices_in(Split::Test).is_empty() {
            Split::Val
        } else {
            Split::Test
        };
        for (config, row) in configs.iter().zip(rows.iter_mut()) {
            let hyper = Hyperparams {
                seed,
                subgraphs: config.subgraphs,
                lambda: row.lambda,
                ..settings.hyper.clone()
            };
            info!("ablation `{}` with seed {seed}", config.name);
            let run = train(&corpus, &bundle, &hyper)?;
            let checkpoint = run.checkpoint();
            let sub = dir.join(config.slug);
            std::fs::create_dir_all(&sub)?;
            checkpoint.write(&sub.join(format!("checkpoint_seed{seed}.lgck")))?;
            let report = evaluate(&checkpoint.params, &hyper, &corpus, &bundle, split)?;
            row.accuracy.push(report.accuracy);
            row.macro_f1.push(report.macro_f1);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for row in &mut rows {
        row.mean_accuracy = mean(&row.accuracy);
        row.mean_macro_f1 = mean(&row.macro_f1);
    }
    write_json(&dir.join("ablation.json"), &rows)?;

    let mut table = String::from("| Model | ACC | F1 |\n|---|---|---|\n");
    for row in &rows {
        table.push_str(&format!("| {} | {:.4} | {:.4} |\n", row.config, row.mean_accuracy, row.mean_macro_f1));
    }
    std::fs::write(dir.join("ablation.md"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn synth_cmd(spec: &SyntheticSpec, seed: u64, dir: &Path) -> Result<()> {
    let synth = generate_synthetic_corpus(spec, seed)?;
    synth.write(dir).with_context(|| format!("writing into {}", dir.display()))?;
    println!(
        "wrote {} documents, {} morpheme vectors, {} entity vectors to {}",
        synth.corpus.len(),
        synth.morpheme_embeddings.len(),
        synth.entity_embeddings.len(),
        dir.display()
    );
    Ok(())
}

/// Spec of the small corpus used by the gradient check command.
pub fn micro_spec() -> SyntheticSpec {
    SyntheticSpec {
        classes: 3,
        docs_per_class: 3,
        vocab_per_class: 4,
        min_len: 3,
        max_len: 5,
        entity_density: 1.0,
        entities_per_class: 2,
        embedding_dim: 5,
        entity_dim: 4,
        ..SyntheticSpec::default()
    }
}

#[derive(Debug, Serialize)]
struct GradcheckOutput {
    max_rel_error: f64,
    tolerance: f64,
    worst_parameter: Option<String>,
    worst_entry: Option<usize>,
    checked: usize,
    excluded: usize,
    parameters: usize,
}

pub fn gradcheck_cmd(hyper: &Hyperparams, step: f64, tolerance: f64) -> Result<()> {
    let synth = generate_synthetic_corpus(&micro_spec(), hyper.seed)?;
    let prepare = PrepareOptions {
        min_freq: 1,
        per_class: 2,
        seed: hyper.seed,
        deduplicate: true,
    };
    let corpus = prepare_corpus(synth.corpus, &prepare)?;
    let graph = GraphConfig {
        window: hyper.window,
        entity_min_sim: hyper.entity_min_sim,
        ..GraphConfig::default()
    };
    let bundle = build_graphs(&corpus, &synth.morpheme_embeddings, &synth.entity_embeddings, &graph)?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(hyper.seed);
    let params = ModelParameters::init(&bundle, hyper.subgraphs, hyper.hidden, corpus.num_classes(), &mut rng);
    let targets = TrainTargets::from_corpus(&corpus, hyper.contrastive_scope)?;
    let report = check_model_gradients(&bundle, &params, &targets, hyper, Objective::Unified, step)?;
    let output = GradcheckOutput {
        max_rel_error: report.max_rel_error,
        tolerance,
        worst_parameter: report.worst.map(|(p, _)| params.names()[p].clone()),
        worst_entry: report.worst.map(|(_, e)| e),
        checked: report.checked,
        excluded: report.excluded,
        parameters: params.num_scalars(),
    };
    println!("{}", serde_json::to_string(&output)?);
    if !report.passes(tolerance) {
        bail!(
            "gradient check failed: max relative error {:.3e} is not below {:.0e}",
            report.max_rel_error,
            tolerance
        );
    }
    Ok(())
}

pub fn read_synth_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
