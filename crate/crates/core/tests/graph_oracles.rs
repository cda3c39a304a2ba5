mod common;

use std::collections::{HashMap, HashSet};

use common::*;
use ligram::corpus::SyntheticSpec;
use ligram::graph::{
    build_graphs, compute_document_pmi, compute_entity_attention, compute_tfidf_attention, compute_windowed_pmi,
    cosine_adjacency, graph_stats, normalize_adjacency, read_sparse, write_sparse, GraphConfig, TokenKind,
};
use ligram::numerics::{Matrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn windowed_pmi_matches_brute_force() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, 30, 15);
        let window = rng.gen_range(1..=7);
        let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| d.morphemes.clone()).collect();
        let oracle = brute_window_pmi(&docs, window);
        let got = compute_windowed_pmi(&corpus, TokenKind::Morpheme, window).unwrap();
        let err = compare_pmi(&got, &oracle, |t| corpus.morpheme_vocab.get(t).unwrap())
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(err <= 1e-12, "seed {seed}: {err:e}");
        assert!(got.is_symmetric());
        assert!((0..got.n_rows()).all(|i| got.get(i, i) == 0.0));
        assert!(got.values().iter().all(|&v| v > 0.0));
    }
}

#[test]
fn document_pmi_matches_brute_force() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let corpus = random_corpus(&mut rng, 30, 15);
        let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| d.pos_tags.clone()).collect();
        let oracle = brute_document_pmi(&docs);
        let got = compute_document_pmi(&corpus, TokenKind::Pos).unwrap();
        let err = compare_pmi(&got, &oracle, |t| corpus.pos_vocab.get(t).unwrap())
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(err <= 1e-12, "seed {seed}: {err:e}");
    }
}

#[test]
fn wide_window_equals_document_pmi() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let corpus = random_corpus(&mut rng, 20, 12);
        let windowed = compute_windowed_pmi(&corpus, TokenKind::Morpheme, 12).unwrap();
        let document = compute_document_pmi(&corpus, TokenKind::Morpheme).unwrap();
        assert_eq!(windowed, document);
    }
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> (SparseMatrix, Dense) {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                let w = rng.gen_range(0.01..3.0);
                d[i][j] = w;
                d[j][i] = w;
            }
        }
    }
    let triples = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| d[i][j] != 0.0)
        .map(|(i, j)| (i, j, d[i][j]))
        .collect();
    (SparseMatrix::from_triples(n, n, triples).unwrap(), d)
}

#[test]
fn normalization_matches_dense_oracle() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let n = rng.gen_range(1..=20);
        let (a, d) = random_symmetric(&mut rng, n);
        let got = sparse_to_dense(&normalize_adjacency(&a).unwrap());
        let err = max_abs_diff(&got, &dense_normalize(&d));
        assert!(err <= 1e-12, "seed {seed}: {err:e}");
    }
}

#[test]
fn tfidf_matches_counting_oracle() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let corpus = random_corpus(&mut rng, 25, 10);
        let n = corpus.len() as f64;
        let mut df: HashMap<&str, f64> = HashMap::new();
        for d in &corpus.documents {
            for t in d.morphemes.iter().collect::<HashSet<_>>() {
                *df.entry(t.as_str()).or_default() += 1.0;
            }
        }
        let att = compute_tfidf_attention(&corpus, TokenKind::Morpheme);
        assert_eq!(att.num_documents(), corpus.len());
        assert_eq!(att.num_nodes(), corpus.morpheme_vocab.len());
        for (i, d) in corpus.documents.iter().enumerate() {
            for (j, token) in corpus.morpheme_vocab.tokens().iter().enumerate() {
                let tf = d.morphemes.iter().filter(|m| *m == token).count() as f64;
                let expected = if tf == 0.0 { 0.0 } else { tf * (n / df[token.as_str()]).ln() };
                assert!((att.weights.get(i, j) - expected).abs() <= 1e-12, "seed {seed} doc {i} token {token}");
            }
        }
    }
}

#[test]
fn entity_attention_is_membership() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let corpus = random_corpus(&mut rng, 20, 8);
        let att = compute_entity_attention(&corpus);
        for (i, d) in corpus.documents.iter().enumerate() {
            for (j, e) in corpus.entity_vocab.tokens().iter().enumerate() {
                let expected = if d.entities.contains(e) { 1.0 } else { 0.0 };
                assert_eq!(att.weights.get(i, j), expected);
            }
        }
    }
}

#[test]
fn entity_cosine_edges_match_oracle() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let n = rng.gen_range(1..15);
        let dim = rng.gen_range(1..6);
        let rows: Dense = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let features = Matrix::from_rows(&rows);
        let min_sim = rng.gen_range(-0.5..0.9);
        let got = sparse_to_dense(&cosine_adjacency(&features, min_sim, |i| i.to_string()).unwrap());
        for i in 0..n {
            for j in 0..n {
                let c = cosine(&rows[i], &rows[j]);
                let expected = if i != j && c >= min_sim { c } else { 0.0 };
                assert!((got[i][j] - expected).abs() <= 1e-12, "seed {seed} ({i},{j})");
            }
        }
    }
    let zero = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
    assert!(cosine_adjacency(&zero, 0.5, |i| format!("e{i}")).is_err());
}

#[test]
fn stats_follow_operation_count_formula() {
    let spec = SyntheticSpec::default();
    let fx = fixture(&spec, 3, 10);
    let hidden = 7;
    let report = graph_stats(&fx.bundle, fx.corpus.len(), hidden);
    let d = hidden as f64;
    let mut gcn = 0.0;
    for g in fx.bundle.subgraphs() {
        gcn += g.adjacency.nnz() as f64 * (g.features.cols() as f64 + d) + 2.0 * g.features.rows() as f64 * d * d;
    }
    let n = fx.corpus.len() as f64;
    assert_eq!(report.subgraphs.len(), 3);
    assert!((report.gcn_ops - gcn).abs() <= 1e-9 * gcn);
    assert!((report.pairwise_ops - 2.0 * n * n * d).abs() <= 1e-9);
    assert!((report.total_ops - gcn - 2.0 * n * n * d).abs() <= 1e-6);
}

#[test]
fn bundle_graphs_are_consistent() {
    let spec = SyntheticSpec::default();
    let synth = ligram::corpus::generate_synthetic_corpus(&spec, 9).unwrap();
    let corpus = ligram::corpus::build_vocabularies(synth.corpus).unwrap();
    let bundle = build_graphs(&corpus, &synth.morpheme_embeddings, &synth.entity_embeddings, &GraphConfig::default())
        .unwrap();
    assert_eq!(bundle.num_documents(), corpus.len());
    assert_eq!(bundle.morpheme.num_nodes(), corpus.morpheme_vocab.len());
    assert_eq!(bundle.pos.features, Matrix::identity(corpus.pos_vocab.len()));
    for g in bundle.subgraphs() {
        assert!(g.adjacency.is_symmetric());
        let expected = dense_normalize(&sparse_to_dense(&g.adjacency));
        assert!(max_abs_diff(&sparse_to_dense(&g.normalized), &expected) <= 1e-12);
    }
}

#[test]
fn sparse_text_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let (a, _) = random_symmetric(&mut rng, 12);
        let path = dir.path().join(format!("a{seed}.txt"));
        write_sparse(&a, &path).unwrap();
        assert_eq!(read_sparse(&path).unwrap(), a);
    }
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "2 2 3\n0 1 1.0\n").unwrap();
    assert!(read_sparse(&bad).is_err());
}
