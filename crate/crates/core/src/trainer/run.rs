use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use crate::model::{forward_on_tape, full_forward, predict, Checkpoint, ContrastiveScope, Hyperparams, ModelParameters, Prediction};
use crate::numerics::{check_gradients, GradCheckReport, Matrix, Mode, SparseMatrix, Tape, Var};
use crate::semcon::{assign_pseudo_topics, contrastive_loss, form_pairs, TopicAssignment};
use crate::trainer::loss::{cross_entropy_loss, unified_loss};
use crate::trainer::metrics::MetricsReport;
use crate::trainer::optim::{clip_grad_norm, AdamW};

/// Which terms enter the optimized loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `L_ce + λ·L_con`, with `L_con` computed even when `λ = 0`.
    Unified,
    /// `L_ce` alone; the contrastive term is never built.
    CrossEntropyOnly,
}

/// Labeled documents for the supervised term and the contrastive scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainTargets {
    pub indices: Vec<usize>,
    pub classes: Vec<usize>,
    pub scope: Vec<usize>,
}

impl TrainTargets {
    pub fn from_corpus(corpus: &Corpus, scope: ContrastiveScope) -> Result<Self> {
        let indices = corpus.indices_in(Split::Train);
        if indices.is_empty() {
            return Err(Error::EmptyTrainSplit);
        }
        let labels = corpus.labels();
        let classes = indices
            .iter()
            .map(|&i| {
                labels[i].ok_or_else(|| Error::MissingLabel {
                    id: corpus.documents[i].id.clone(),
                    split: Split::Train.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scope = match scope {
            ContrastiveScope::All => (0..corpus.len()).collect(),
            ContrastiveScope::Labeled => indices.clone(),
        };
        Ok(Self {
            indices,
            classes,
            scope,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: Var,
    pub ce: Var,
    pub con: Option<Var>,
    pub logits: Var,
    /// Values used without gradient in this pass.
    pub detached: Detached,
}

/// The quantities that are computed from current values and then treated as
/// constants: the document graph and the pseudo-topic assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Detached {
    pub doc_graph: SparseMatrix,
    pub topics: Option<TopicAssignment>,
}

/// Forward pass plus loss on `tape`. Pseudo-topics come from the current
/// logit values and carry no gradient. With `frozen`, the document graph and
/// pseudo-topics are taken from it instead of being recomputed.
#[allow(clippy::too_many_arguments)]
pub fn loss_on_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    bundle: &GraphBundle,
    params: &ModelParameters,
    vars: &[Var],
    targets: &TrainTargets,
    hyper: &Hyperparams,
    mode: Mode,
    rng: &mut R,
    objective: Objective,
    frozen: Option<&Detached>,
) -> Result<LossTerms> {
    let out = forward_on_tape(tape, bundle, params, vars, hyper, mode, rng, frozen.map(|f| &f.doc_graph))?;
    let ce = cross_entropy_loss(tape, out.logits, &targets.indices, &targets.classes)?;
    match objective {
        Objective::CrossEntropyOnly => Ok(LossTerms {
            total: ce,
            ce,
            con: None,
            logits: out.logits,
            detached: Detached {
                doc_graph: out.doc_graph,
                topics: None,
            },
        }),
        Objective::Unified => {
            let topics = match frozen.and_then(|f| f.topics.clone()) {
                Some(t) => t,
                None => assign_pseudo_topics(tape.value(out.logits)),
            };
            let pairs = form_pairs(&topics, &targets.scope);
            let con = contrastive_loss(tape, out.doc_embeddings, &pairs, hyper.temperature)?;
            let total = unified_loss(tape, ce, con, hyper.lambda)?;
            Ok(LossTerms {
                total,
                ce,
                con: Some(con),
                logits: out.logits,
                detached: Detached {
                    doc_graph: out.doc_graph,
                    topics: Some(topics),
                },
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub ce: f64,
    pub con: Option<f64>,
    pub total: f64,
    pub val_accuracy: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub hyper: Hyperparams,
    pub history: Vec<EpochRecord>,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    pub best_params: ModelParameters,
    pub final_params: ModelParameters,
}

impl TrainRun {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::rounded(self.hyper.clone(), &self.best_params)
    }
}

pub fn train(corpus: &Corpus, bundle: &GraphBundle, hyper: &Hyperparams) -> Result<TrainRun> {
    train_with_objective(corpus, bundle, hyper, Objective::Unified)
}

/// Full-batch training. Validation runs every `eval_every` epochs and after
/// the last epoch; the parameters are kept whenever validation accuracy
/// strictly improves.
pub fn train_with_objective(
    corpus: &Corpus,
    bundle: &GraphBundle,
    hyper: &Hyperparams,
    objective: Objective,
) -> Result<TrainRun> {
    hyper.validate()?;
    if bundle.num_documents() != corpus.len() {
        return Err(Error::Bundle(format!(
            "graphs cover {} documents, corpus has {}",
            bundle.num_documents(),
            corpus.len()
        )));
    }
    let targets = TrainTargets::from_corpus(corpus, hyper.contrastive_scope)?;
    let val = labeled_split(corpus, Split::Val)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = ModelParameters::init(bundle, hyper.subgraphs, hyper.hidden, corpus.num_classes(), &mut rng);
    let mut optimizer = AdamW::new(params.values(), hyper.lr, hyper.weight_decay);
    let mut history = Vec::with_capacity(hyper.max_epochs);
    let mut best: Option<(f64, usize, ModelParameters)> = None;

    for epoch in 1..=hyper.max_epochs {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.values().iter().map(|m| tape.param(m.clone())).collect();
        let terms = loss_on_tape(&mut tape, bundle, &params, &vars, &targets, hyper, Mode::Train, &mut rng, objective, None)?;
        let ce = tape.value(terms.ce)[(0, 0)];
        let con = terms.con.map(|v| tape.value(v)[(0, 0)]);
        let total = tape.value(terms.total)[(0, 0)];
        if !total.is_finite() || !ce.is_finite() || !con.map_or(true, f64::is_finite) {
            return Err(Error::NanLoss {
                epoch,
                ce,
                con: con.unwrap_or(0.0),
            });
        }
        tape.backward(terms.total)?;
        let mut grads: Vec<Matrix> = vars
            .iter()
            .zip(params.values())
            .map(|(&v, p)| tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
            .collect();
        if let Some(max_norm) = hyper.grad_clip {
            clip_grad_norm(&mut grads, max_norm);
        }
        optimizer.step(params.values_mut(), &grads)?;

        let mut record = EpochRecord {
            epoch,
            ce,
            con,
            total,
            val_accuracy: None,
            val_macro_f1: None,
        };
        if epoch % hyper.eval_every == 0 || epoch == hyper.max_epochs {
            let report = evaluate_indices(&params, hyper, corpus, bundle, &val, Some(epoch))?;
            record.val_accuracy = Some(report.accuracy);
            record.val_macro_f1 = Some(report.macro_f1);
            info!(
                "epoch {epoch}: ce {ce:.6} con {} loss {total:.6} val acc {:.4} val f1 {:.4}",
                con.map_or("-".to_string(), |c| format!("{c:.6}")),
                report.accuracy,
                report.macro_f1
            );
            if best.as_ref().map_or(true, |(acc, _, _)| report.accuracy > *acc) {
                debug!("new best validation accuracy at epoch {epoch}");
                best = Some((report.accuracy, epoch, params.clone()));
            }
        }
        history.push(record);
    }

    let (best_val_accuracy, best_epoch, best_params) = best.ok_or_else(|| {
        Error::InvalidHyperparam("max_epochs must be at least 1".into())
    })?;
    Ok(TrainRun {
        hyper: hyper.clone(),
        history,
        best_val_accuracy,
        best_epoch,
        best_params,
        final_params: params,
    })
}

fn labeled_split(corpus: &Corpus, split: Split) -> Result<Vec<usize>> {
    let idx = corpus.indices_in(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(split.to_string()));
    }
    Ok(idx)
}

/// Eval-mode predictions for every document.
pub fn predict_corpus(params: &ModelParameters, hyper: &Hyperparams, bundle: &GraphBundle) -> Result<Prediction> {
    // Eval mode never draws from the generator.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = full_forward(bundle, params, hyper, Mode::Eval, &mut rng)?;
    Ok(predict(pass.logits()))
}

pub fn evaluate(
    params: &ModelParameters,
    hyper: &Hyperparams,
    corpus: &Corpus,
    bundle: &GraphBundle,
    split: Split,
) -> Result<MetricsReport> {
    let idx = labeled_split(corpus, split)?;
    evaluate_indices(params, hyper, corpus, bundle, &idx, None)
}

fn evaluate_indices(
    params: &ModelParameters,
    hyper: &Hyperparams,
    corpus: &Corpus,
    bundle: &GraphBundle,
    indices: &[usize],
    epoch: Option<usize>,
) -> Result<MetricsReport> {
    let labels = corpus.labels();
    let prediction = predict_corpus(params, hyper, bundle)?;
    let mut truth = Vec::with_capacity(indices.len());
    let mut predicted = Vec::with_capacity(indices.len());
    for &i in indices {
        let doc = &corpus.documents[i];
        let t = labels[i].ok_or_else(|| Error::MissingLabel {
            id: doc.id.clone(),
            split: doc.split.map_or("none".to_string(), |s| s.to_string()),
        })?;
        truth.push(t);
        predicted.push(prediction.classes[i]);
    }
    Ok(MetricsReport::from_predictions(
        &truth,
        &predicted,
        &corpus.class_names,
        epoch,
        hyper.seed,
    ))
}

/// Central-difference check of the full training loss with respect to every
/// model parameter, with dropout disabled. The document graph and
/// pseudo-topics are computed once at the given parameters and held fixed,
/// matching their treatment in the backward pass.
pub fn check_model_gradients(
    bundle: &GraphBundle,
    params: &ModelParameters,
    targets: &TrainTargets,
    hyper: &Hyperparams,
    objective: Objective,
    step: f64,
) -> Result<GradCheckReport> {
    let hyper = Hyperparams {
        dropout: 0.0,
        ..hyper.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.values().iter().map(|m| tape.param(m.clone())).collect();
    let base = loss_on_tape(&mut tape, bundle, params, &vars, targets, &hyper, Mode::Train, &mut rng, objective, None)?;
    let frozen = base.detached;
    check_gradients(
        |tape, vars| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let terms = loss_on_tape(
                tape,
                bundle,
                params,
                vars,
                targets,
                &hyper,
                Mode::Train,
                &mut rng,
                objective,
                Some(&frozen),
            )?;
            Ok(terms.total)
        },
        params.values(),
        step,
    )
}
