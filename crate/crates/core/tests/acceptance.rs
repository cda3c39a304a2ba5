//! Acceptance suite. Prints one `P<n> PASS|FAIL` line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ligram::corpus::{assign_splits, build_vocabularies, generate_synthetic_corpus, Split, SyntheticSpec};
use ligram::graph::{build_graphs, compute_document_pmi, compute_windowed_pmi, normalize_adjacency, GraphConfig, TokenKind};
use ligram::model::{full_forward, Hyperparams, ModelParameters};
use ligram::numerics::{Matrix, Mode, SparseMatrix, Tape, Var};
use ligram::semcon::{contrastive_loss, form_pairs, Pairs, TopicAssignment};
use ligram::trainer::{
    cross_entropy_loss, evaluate, loss_on_tape, predict_corpus, train, train_with_objective, AdamW, Objective,
    TrainTargets,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p1_pmi_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..25 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, 30, 15);
        let window = 5;

        let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| d.morphemes.clone()).collect();
        let got = compute_windowed_pmi(&corpus, TokenKind::Morpheme, window).map_err(|e| e.to_string())?;
        let err = compare_pmi(&got, &brute_window_pmi(&docs, window), |t| corpus.morpheme_vocab.get(t).unwrap())
            .map_err(|e| format!("corpus {seed} windowed: {e}"))?;
        worst = worst.max(err);

        let tags: Vec<Vec<String>> = corpus.documents.iter().map(|d| d.pos_tags.clone()).collect();
        let got = compute_document_pmi(&corpus, TokenKind::Pos).map_err(|e| e.to_string())?;
        let err = compare_pmi(&got, &brute_document_pmi(&tags), |t| corpus.pos_vocab.get(t).unwrap())
            .map_err(|e| format!("corpus {seed} document: {e}"))?;
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-12, || format!("max weight error {worst:e}"))?;
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("25 corpora, identical edge sets, max weight error {worst:.1e}, {elapsed:.2?}"))
}

fn p2_normalization_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(1..=20);
        let mut d = vec![vec![0.0; n]; n];
        let mut triples = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.35) {
                    let w = rng.gen_range(0.01..5.0);
                    d[i][j] = w;
                    d[j][i] = w;
                    triples.push((i, j, w));
                    triples.push((j, i, w));
                }
            }
        }
        let a = SparseMatrix::from_triples(n, n, triples).map_err(|e| e.to_string())?;
        let got = normalize_adjacency(&a).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&sparse_to_dense(&got), &dense_normalize(&d)));
    }
    check(worst <= 1e-12, || format!("max abs error {worst:e}"))?;
    Ok(format!("50 matrices, max abs error {worst:.1e}"))
}

/// Eight documents over three classes.
fn eight_doc_fixture(seed: u64) -> Fixture {
    let spec = SyntheticSpec {
        classes: 3,
        docs_per_class: 3,
        vocab_per_class: 4,
        min_len: 3,
        max_len: 6,
        entity_density: 1.0,
        entities_per_class: 2,
        embedding_dim: 5,
        entity_dim: 4,
        ..SyntheticSpec::default()
    };
    let mut synth = generate_synthetic_corpus(&spec, seed).unwrap();
    synth.corpus.documents.pop();
    let corpus = assign_splits(build_vocabularies(synth.corpus).unwrap(), 2, seed).unwrap();
    let bundle = build_graphs(&corpus, &synth.morpheme_embeddings, &synth.entity_embeddings, &GraphConfig::default())
        .unwrap();
    Fixture { corpus, bundle }
}

fn p3_gradient_check() -> Outcome {
    let start = Instant::now();
    let fx = eight_doc_fixture(3);
    if fx.corpus.len() != 8 || fx.corpus.num_classes() != 3 {
        return Err("fixture is not 8 docs / 3 classes".into());
    }
    let hyper = Hyperparams {
        hidden: 6,
        delta: 1.0,
        lambda: 0.7,
        dropout: 0.0,
        ..Hyperparams::default()
    };
    let targets = TrainTargets::from_corpus(&fx.corpus, hyper.contrastive_scope).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = ModelParameters::init(&fx.bundle, hyper.subgraphs, hyper.hidden, 3, &mut rng);

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.values().iter().map(|m| tape.param(m.clone())).collect();
    let base = loss_on_tape(&mut tape, &fx.bundle, &params, &vars, &targets, &hyper, Mode::Train, &mut rng, Objective::Unified, None)
        .map_err(|e| e.to_string())?;
    tape.backward(base.total).map_err(|e| e.to_string())?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(params.values())
        .map(|(&v, p)| tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
        .collect();
    let frozen = base.detached.clone();
    let edges = frozen.doc_graph.nnz();

    let loss_at = |values: &[Matrix]| -> f64 {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|m| t.param(m.clone())).collect();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let terms = loss_on_tape(&mut t, &fx.bundle, &params, &vs, &targets, &hyper, Mode::Train, &mut r, Objective::Unified, Some(&frozen))
            .unwrap();
        t.value(terms.total)[(0, 0)]
    };

    let h = 1e-6;
    let mut probe: Vec<Matrix> = params.values().to_vec();
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for (k, name) in params.names().iter().enumerate() {
        for e in 0..probe[k].as_slice().len() {
            let orig = probe[k].as_slice()[e];
            probe[k].as_mut_slice()[e] = orig + h;
            let plus = loss_at(&probe);
            probe[k].as_mut_slice()[e] = orig - h;
            let minus = loss_at(&probe);
            probe[k].as_mut_slice()[e] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[k].as_slice()[e];
            let rel = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
            count += 1;
            if rel > worst.0 {
                worst = (rel, format!("{name}[{e}]"));
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst.0 < 1e-4, || format!("max rel error {:e} at {}", worst.0, worst.1))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{count} entries, {edges} document edges, max rel error {:.1e} ({}), {elapsed:.2?}",
        worst.0, worst.1
    ))
}

fn p4_pooling_invariants() -> Outcome {
    let mut blocks_checked = 0;
    let mut full_rows = 0;
    let mut edges = 0;
    for seed in 0..6 {
        let spec = SyntheticSpec {
            docs_per_class: 15,
            entity_density: 0.4,
            overlap: 0.2 * (seed % 3) as f64,
            ..SyntheticSpec::default()
        };
        let fx = fixture(&spec, 40 + seed, 4);
        for delta in [2.7, 1.5, 0.5] {
            let hyper = Hyperparams {
                hidden: 8,
                delta,
                ..Hyperparams::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = ModelParameters::init(&fx.bundle, hyper.subgraphs, hyper.hidden, 3, &mut rng);
            let pass = full_forward(&fx.bundle, &params, &hyper, Mode::Eval, &mut rng).map_err(|e| e.to_string())?;
            let x = pass.doc_embeddings();
            for i in 0..x.rows() {
                let mut nonzero = 0;
                for b in 0..3 {
                    let block = &x.row(i)[b * 8..(b + 1) * 8];
                    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                    blocks_checked += 1;
                    if norm != 0.0 {
                        nonzero += 1;
                        check((norm - 1.0).abs() <= 1e-6, || format!("doc {i} block {b} norm {norm}"))?;
                    }
                }
                if nonzero == 3 {
                    full_rows += 1;
                    let norm = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    check((norm - 3f64.sqrt()).abs() <= 1e-6, || format!("doc {i} row norm {norm}"))?;
                }
            }
            let a = &pass.outputs.doc_graph;
            check(a.is_symmetric(), || "document graph not symmetric".into())?;
            for (i, j, w) in a.iter() {
                edges += 1;
                check(i != j, || format!("self loop at {i}"))?;
                check(w >= delta && w <= 3.0 + 1e-9, || format!("edge ({i},{j}) weight {w} outside [{delta}, 3]"))?;
            }
        }
    }
    check(full_rows > 0 && edges > 0, || "fixtures too sparse to exercise the invariants".into())?;
    Ok(format!("{blocks_checked} blocks, {full_rows} full rows, {edges} document edges"))
}

fn loss_of(x: &Matrix, pairs: &Pairs, tau: f64) -> f64 {
    let mut t = Tape::new();
    let v = t.param(x.clone());
    let l = contrastive_loss(&mut t, v, pairs, tau).unwrap();
    t.value(l)[(0, 0)]
}

fn assignment(topics: Vec<usize>) -> TopicAssignment {
    TopicAssignment {
        distributions: Matrix::zeros(topics.len(), 1),
        topics,
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn p5_contrastive_closed_forms() -> Outcome {
    let mut worst_closed = 0.0f64;
    for n in [3usize, 5, 10] {
        let x = Matrix::from_vec(n, 4, (0..n).flat_map(|_| [0.3, -1.2, 0.5, 2.0]).collect()).unwrap();
        let pairs = form_pairs(&assignment(vec![0; n]), &(0..n).collect::<Vec<_>>());
        let got = loss_of(&x, &pairs, 1.0);
        let expected = ((n - 1) as f64).ln();
        worst_closed = worst_closed.max((got - expected).abs());
    }
    check(worst_closed <= 1e-9, || format!("identical-embedding error {worst_closed:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let x = random_rows(&mut rng, 7, 5);
    let topics = vec![0, 1, 0, 2, 1, 0, 2];
    let scope: Vec<usize> = (0..7).collect();
    let pairs = form_pairs(&assignment(topics.clone()), &scope);
    let mut worst_oracle = 0.0f64;
    for tau in [1.0, 0.5, 0.1] {
        let got = loss_of(&x, &pairs, tau);
        worst_oracle = worst_oracle.max((got - brute_contrastive(&dense(&x), &topics, &scope, tau)).abs());
    }
    check(worst_oracle <= 1e-10, || format!("7-doc oracle error {worst_oracle:e}"))?;

    // Monotonicity of L_i: only the anchor keeps its positive set, so the
    // loss is L_anchor / m. The anchor has a single positive; with several,
    // dL_i/ds_ip = softmax_p - 1/|P_i| can be positive.
    let mut probes = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let n = rng.gen_range(4..9);
        let x = random_rows(&mut rng, n, 4);
        let anchor = 0;
        let mut topics = vec![1; n];
        topics[anchor] = 0;
        topics[1] = 0;
        let mut pairs = form_pairs(&assignment(topics.clone()), &(0..n).collect::<Vec<_>>());
        for k in 1..n {
            pairs.positives[k].clear();
        }
        let positive = *pairs.positives[anchor].choose(&mut rng).unwrap();
        let negatives: Vec<usize> = (1..n).filter(|&j| topics[j] != topics[anchor]).collect();
        let negative = *negatives.choose(&mut rng).unwrap();
        let base = loss_of(&x, &pairs, 1.0);
        let t = rng.gen_range(0.05..0.5);

        for (target, should_drop) in [(positive, true), (negative, false)] {
            let mut moved = x.clone();
            let cos_before = cosine(x.row(anchor), x.row(target));
            for c in 0..4 {
                moved[(target, c)] = (1.0 - t) * x[(target, c)] + t * x[(anchor, c)];
            }
            let cos_after = cosine(moved.row(anchor), moved.row(target));
            if cos_after <= cos_before {
                continue;
            }
            probes += 1;
            let after = loss_of(&moved, &pairs, 1.0);
            if should_drop {
                check(after < base, || format!("trial {trial}: raising a positive similarity did not lower L_i"))?;
            } else {
                check(after > base, || format!("trial {trial}: raising a negative similarity did not raise L_i"))?;
            }
        }
    }
    check(probes >= 150, || format!("only {probes} effective probes"))?;
    Ok(format!(
        "ln(N-1) error {worst_closed:.1e}, 7-doc oracle error {worst_oracle:.1e}, {probes} monotone probes"
    ))
}

fn p6_loss_values() -> Outcome {
    let mut worst = 0.0f64;
    for c in [2usize, 7, 8] {
        let mut t = Tape::new();
        let logits = t.param(Matrix::filled(1, c, 0.37));
        let l = cross_entropy_loss(&mut t, logits, &[0], &[c - 1]).map_err(|e| e.to_string())?;
        worst = worst.max((t.value(l)[(0, 0)] - (c as f64).ln()).abs());
    }
    check(worst <= 1e-9, || format!("uniform-logit error {worst:e}"))?;

    let fx = fixture(&SyntheticSpec::default(), 6, 10);
    let hyper = Hyperparams {
        hidden: 16,
        lambda: 0.0,
        max_epochs: 25,
        seed: 6,
        ..Hyperparams::default()
    };
    let unified = train_with_objective(&fx.corpus, &fx.bundle, &hyper, Objective::Unified).map_err(|e| e.to_string())?;
    let ce_only =
        train_with_objective(&fx.corpus, &fx.bundle, &hyper, Objective::CrossEntropyOnly).map_err(|e| e.to_string())?;
    let a: Vec<u64> = unified.history.iter().map(|r| r.total.to_bits()).collect();
    let b: Vec<u64> = ce_only.history.iter().map(|r| r.total.to_bits()).collect();
    check(a == b, || "lambda = 0 trace differs from the cross-entropy-only trace".into())?;
    check(unified.final_params == ce_only.final_params, || "final parameters differ".into())?;
    Ok(format!("ln C error {worst:.1e}; {} epoch traces bit-identical", a.len()))
}

fn p7_end_to_end() -> Outcome {
    let start = Instant::now();
    let fx = fixture(&SyntheticSpec::default(), 17, 20);
    let hyper = Hyperparams {
        max_epochs: 200,
        seed: 17,
        ..Hyperparams::default()
    };
    let first = train(&fx.corpus, &fx.bundle, &hyper).map_err(|e| e.to_string())?;
    let one_run = start.elapsed();
    let report = evaluate(&first.best_params, &hyper, &fx.corpus, &fx.bundle, Split::Test).map_err(|e| e.to_string())?;
    let second = train(&fx.corpus, &fx.bundle, &hyper).map_err(|e| e.to_string())?;
    check(
        first.history == second.history && first.best_params == second.best_params,
        || "two runs with the same seed differ".into(),
    )?;
    check(report.accuracy >= 0.95, || format!("test accuracy {:.4}", report.accuracy))?;
    check(report.macro_f1 >= 0.95, || format!("test macro-F1 {:.4}", report.macro_f1))?;
    check(one_run < Duration::from_secs(120), || format!("training took {one_run:?}"))?;
    Ok(format!(
        "test acc {:.4}, macro-F1 {:.4} (best epoch {}), {one_run:.2?} per run, deterministic",
        report.accuracy, report.macro_f1, first.best_epoch
    ))
}

fn p8_ablation_direction() -> Outcome {
    let spec = SyntheticSpec {
        overlap: 0.5,
        entity_overlap: 0.0,
        entity_density: 0.9,
        ..SyntheticSpec::default()
    };
    let mut full = Vec::new();
    let mut without = Vec::new();
    for seed in 0..5u64 {
        let fx = fixture(&spec, 80 + seed, 20);
        let hyper = Hyperparams {
            max_epochs: 100,
            seed,
            ..Hyperparams::default()
        };
        for (lambda, out) in [(hyper.lambda, &mut full), (0.0, &mut without)] {
            let h = Hyperparams {
                lambda,
                ..hyper.clone()
            };
            let run = train(&fx.corpus, &fx.bundle, &h).map_err(|e| e.to_string())?;
            let m = evaluate(&run.best_params, &h, &fx.corpus, &fx.bundle, Split::Test).map_err(|e| e.to_string())?;
            out.push(m.macro_f1);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&full), mean(&without));
    check(a >= b - 0.02, || format!("full {a:.4} < w/o contrastive {b:.4} - 0.02"))?;
    Ok(format!("mean test macro-F1 full {a:.4} vs w/o contrastive {b:.4} over 5 seeds"))
}

fn p9_permutation_equivariance() -> Outcome {
    let spec = SyntheticSpec {
        docs_per_class: 20,
        overlap: 0.3,
        ..SyntheticSpec::default()
    };
    let synth = generate_synthetic_corpus(&spec, 21).unwrap();
    let corpus = assign_splits(build_vocabularies(synth.corpus).unwrap(), 8, 21).unwrap();
    let config = GraphConfig::default();
    let bundle = build_graphs(&corpus, &synth.morpheme_embeddings, &synth.entity_embeddings, &config).unwrap();
    let hyper = Hyperparams {
        hidden: 16,
        delta: 2.0,
        max_epochs: 30,
        seed: 21,
        ..Hyperparams::default()
    };
    let run = train(&corpus, &bundle, &hyper).map_err(|e| e.to_string())?;

    let mut worst = 0.0f64;
    for trial in 0..5u64 {
        let mut perm: Vec<usize> = (0..corpus.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(trial));
        let permuted = corpus.permute_documents(&perm);
        let pbundle = build_graphs(&permuted, &synth.morpheme_embeddings, &synth.entity_embeddings, &config).unwrap();
        let a = predict_corpus(&run.best_params, &hyper, &bundle).map_err(|e| e.to_string())?;
        let b = predict_corpus(&run.best_params, &hyper, &pbundle).map_err(|e| e.to_string())?;
        for i in 0..corpus.len() {
            check(a.classes[i] == b.classes[perm[i]], || format!("trial {trial}: doc {i} prediction moved"))?;
            for c in 0..a.probabilities.cols() {
                worst = worst.max((a.probabilities[(i, c)] - b.probabilities[(perm[i], c)]).abs());
            }
        }
        for split in [Split::Val, Split::Test] {
            let ma = evaluate(&run.best_params, &hyper, &corpus, &bundle, split).map_err(|e| e.to_string())?;
            let mb = evaluate(&run.best_params, &hyper, &permuted, &pbundle, split).map_err(|e| e.to_string())?;
            check(ma == mb, || format!("trial {trial}: {split} metrics differ"))?;
        }
    }
    check(worst <= 1e-12, || format!("probability drift {worst:e}"))?;
    Ok(format!(
        "5 permutations, predictions and metrics identical, probability drift {worst:.1e}"
    ))
}

fn p10_adamw() -> Outcome {
    let (lr, wd) = (5e-4, 1e-3);
    let mut p = vec![Matrix::scalar(1.0)];
    let mut opt = AdamW::new(&p, lr, wd);
    opt.step(&mut p, &[Matrix::scalar(0.5)]).map_err(|e| e.to_string())?;
    let first = p[0][(0, 0)];
    check((first - 0.99949950).abs() <= 1e-8, || format!("first step gave {first:.10}"))?;

    // Hand-expanded three-step trajectory with varying gradients.
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let gs = [0.5f64, -1.25, 2.0];
    let p0 = 0.8f64;
    let m1 = (1.0 - b1) * gs[0];
    let v1 = (1.0 - b2) * gs[0] * gs[0];
    let p1 = p0 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps) - lr * wd * p0;
    let m2 = b1 * m1 + (1.0 - b1) * gs[1];
    let v2 = b2 * v1 + (1.0 - b2) * gs[1] * gs[1];
    let p2 = p1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps) - lr * wd * p1;
    let m3 = b1 * m2 + (1.0 - b1) * gs[2];
    let v3 = b2 * v2 + (1.0 - b2) * gs[2] * gs[2];
    let p3 = p2 - lr * (m3 / (1.0 - b1 * b1 * b1)) / ((v3 / (1.0 - b2 * b2 * b2)).sqrt() + eps) - lr * wd * p2;

    let mut p = vec![Matrix::scalar(p0)];
    let mut opt = AdamW::new(&p, lr, wd);
    let mut worst = 0.0f64;
    for (g, expected) in gs.iter().zip([p1, p2, p3]) {
        opt.step(&mut p, &[Matrix::scalar(*g)]).map_err(|e| e.to_string())?;
        worst = worst.max((p[0][(0, 0)] - expected).abs());
    }
    check(worst <= 1e-10, || format!("trajectory error {worst:e}"))?;
    Ok(format!("first step {first:.8}, 3-step trajectory error {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("P1", p1_pmi_oracle),
        ("P2", p2_normalization_oracle),
        ("P3", p3_gradient_check),
        ("P4", p4_pooling_invariants),
        ("P5", p5_contrastive_closed_forms),
        ("P6", p6_loss_values),
        ("P7", p7_end_to_end),
        ("P8", p8_ablation_direction),
        ("P9", p9_permutation_equivariance),
        ("P10", p10_adamw),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('P')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("{name} PASS {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("{name} FAIL {why}");
            }
            Err(_) => {
                failed += 1;
                println!("{name} FAIL panicked");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
