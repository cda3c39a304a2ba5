//! Fixtures and brute-force reference implementations shared by the
//! integration tests. The oracles work on plain nested vectors and token
//! strings so they share no code with the library paths they check.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use ligram::corpus::{
    assign_splits, build_vocabularies, generate_synthetic_corpus, AnnotatedDocument, Corpus, SyntheticSpec,
};
use ligram::graph::{build_graphs, GraphBundle, GraphConfig};
use ligram::numerics::{Matrix, SparseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub struct Fixture {
    pub corpus: Corpus,
    pub bundle: GraphBundle,
}

/// Synthetic corpus with `per_class` documents per class in train + val.
pub fn fixture(spec: &SyntheticSpec, seed: u64, per_class: usize) -> Fixture {
    let synth = generate_synthetic_corpus(spec, seed).unwrap();
    let corpus = build_vocabularies(synth.corpus).unwrap();
    let corpus = assign_splits(corpus, per_class, seed).unwrap();
    let bundle = build_graphs(
        &corpus,
        &synth.morpheme_embeddings,
        &synth.entity_embeddings,
        &GraphConfig::default(),
    )
    .unwrap();
    Fixture { corpus, bundle }
}

/// A small corpus for gradient and oracle checks: `classes * docs_per_class`
/// documents with one train and one val document per class.
pub fn micro_fixture(classes: usize, docs_per_class: usize, seed: u64) -> Fixture {
    let spec = SyntheticSpec {
        classes,
        docs_per_class,
        vocab_per_class: 4,
        min_len: 3,
        max_len: 6,
        entity_density: 0.8,
        entities_per_class: 2,
        embedding_dim: 5,
        entity_dim: 4,
        ..SyntheticSpec::default()
    };
    fixture(&spec, seed, 2)
}

/// Random documents over small token alphabets, some of them empty.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, max_len: usize) -> Corpus {
    let n_docs = rng.gen_range(1..=max_docs);
    let vocab = rng.gen_range(2..=12);
    let tags = rng.gen_range(1..=6);
    let docs = (0..n_docs)
        .map(|i| {
            let len = rng.gen_range(0..=max_len);
            let morphemes: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
            let pos_tags = (0..len).map(|_| format!("T{}", rng.gen_range(0..tags))).collect();
            let entities = (0..rng.gen_range(0..3)).map(|_| format!("E{}", rng.gen_range(0..5))).collect::<HashSet<_>>();
            let mut entities: Vec<String> = entities.into_iter().collect();
            entities.sort();
            AnnotatedDocument {
                id: format!("d{i}"),
                morphemes,
                pos_tags,
                entities,
                label: Some(format!("c{}", i % 2)),
                split: None,
            }
        })
        .collect();
    build_vocabularies(Corpus::new(docs)).unwrap()
}

/// `ln(p(i,j) / (p(i) p(j)))` over binary-presence units, positive values only,
/// keyed by token pair.
fn pmi_from_units(units: &[HashSet<&str>]) -> HashMap<(String, String), f64> {
    let w = units.len() as f64;
    let mut single: HashMap<&str, f64> = HashMap::new();
    let mut pair: HashMap<(&str, &str), f64> = HashMap::new();
    for unit in units {
        for &a in unit {
            *single.entry(a).or_default() += 1.0;
            for &b in unit {
                if a != b {
                    *pair.entry((a, b)).or_default() += 1.0;
                }
            }
        }
    }
    let mut out = HashMap::new();
    for (&(a, b), &c) in &pair {
        let p_ab = c / w;
        let p_a = single[a] / w;
        let p_b = single[b] / w;
        let v = (p_ab / (p_a * p_b)).ln();
        if v > 0.0 {
            out.insert((a.to_string(), b.to_string()), v);
        }
    }
    out
}

pub fn brute_window_pmi(docs: &[Vec<String>], window: usize) -> HashMap<(String, String), f64> {
    let mut units = Vec::new();
    for d in docs {
        if d.len() <= window {
            units.push(d.iter().map(String::as_str).collect());
        } else {
            for start in 0..=d.len() - window {
                units.push(d[start..start + window].iter().map(String::as_str).collect());
            }
        }
    }
    pmi_from_units(&units)
}

pub fn brute_document_pmi(docs: &[Vec<String>]) -> HashMap<(String, String), f64> {
    let units: Vec<HashSet<&str>> = docs.iter().map(|d| d.iter().map(String::as_str).collect()).collect();
    pmi_from_units(&units)
}

/// Largest absolute difference between `a` and the oracle map, translated
/// through `index`; also fails when the nonzero patterns differ.
pub fn compare_pmi(
    a: &SparseMatrix,
    oracle: &HashMap<(String, String), f64>,
    index: impl Fn(&str) -> usize,
) -> Result<f64, String> {
    if a.nnz() != oracle.len() {
        return Err(format!("{} entries, oracle has {}", a.nnz(), oracle.len()));
    }
    let mut worst = 0.0f64;
    for ((x, y), &v) in oracle {
        let got = a.get(index(x), index(y));
        if got == 0.0 {
            return Err(format!("missing edge {x}-{y}"));
        }
        worst = worst.max((got - v).abs());
    }
    Ok(worst)
}

pub fn dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn sparse_to_dense(m: &SparseMatrix) -> Dense {
    let mut d = vec![vec![0.0; m.n_cols()]; m.n_rows()];
    for (i, j, w) in m.iter() {
        d[i][j] = w;
    }
    d
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn relu(a: &Dense) -> Dense {
    a.iter().map(|r| r.iter().map(|&v| v.max(0.0)).collect()).collect()
}

pub fn l2_rows(a: &Dense) -> Dense {
    a.iter()
        .map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 1e-12 {
                vec![0.0; r.len()]
            } else {
                r.iter().map(|v| v / n).collect()
            }
        })
        .collect()
}

/// `D^-1/2 (A + I) D^-1/2` with explicit diagonal matrices.
pub fn dense_normalize(a: &Dense) -> Dense {
    let n = a.len();
    let mut hat = a.clone();
    for (i, row) in hat.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let deg: Vec<f64> = hat.iter().map(|r| r.iter().sum()).collect();
    let mut d_inv_sqrt = vec![vec![0.0; n]; n];
    for i in 0..n {
        d_inv_sqrt[i][i] = 1.0 / deg[i].sqrt();
    }
    matmul(&matmul(&d_inv_sqrt, &hat), &d_inv_sqrt)
}

/// `Ã · ReLU(Ã · X · W1) · W2`.
pub fn gcn(norm_adj: &Dense, x: &Dense, w1: &Dense, w2: &Dense) -> Dense {
    let h = relu(&matmul(&matmul(norm_adj, x), w1));
    matmul(&matmul(norm_adj, &h), w2)
}

/// All off-diagonal pairs whose dot product reaches `delta`.
pub fn brute_document_graph(x: &Dense, delta: f64) -> Dense {
    let n = x.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d: f64 = x[i].iter().zip(&x[j]).map(|(p, q)| p * q).sum();
                if d >= delta {
                    a[i][j] = d;
                }
            }
        }
    }
    a
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| {
            assert_eq!(r.len(), s.len());
            r.iter().zip(s).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Contrastive loss by direct double loop over documents.
pub fn brute_contrastive(x: &Dense, topics: &[usize], scope: &[usize], tau: f64) -> f64 {
    let mut total = 0.0;
    for &i in scope {
        let z: Vec<usize> = scope.iter().copied().filter(|&a| a != i).collect();
        let p: Vec<usize> = z.iter().copied().filter(|&a| topics[a] == topics[i]).collect();
        if p.is_empty() {
            continue;
        }
        let denom: f64 = z.iter().map(|&a| (cosine(&x[i], &x[a]) / tau).exp()).sum();
        let mut li = 0.0;
        for &q in &p {
            li -= ((cosine(&x[i], &x[q]) / tau).exp() / denom).ln();
        }
        total += li / p.len() as f64;
    }
    total / scope.len() as f64
}
