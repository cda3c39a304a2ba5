use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::pmi::{compute_document_pmi, compute_windowed_pmi, TokenKind};
use crate::numerics::{Matrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubgraphKind {
    Morpheme,
    Pos,
    Entity,
}

impl SubgraphKind {
    pub const ALL: [SubgraphKind; 3] = [SubgraphKind::Morpheme, SubgraphKind::Pos, SubgraphKind::Entity];

    pub fn as_str(self) -> &'static str {
        match self {
            SubgraphKind::Morpheme => "morpheme",
            SubgraphKind::Pos => "pos",
            SubgraphKind::Entity => "entity",
        }
    }
}

/// What to do when a vocabulary morpheme has no pretrained vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingEmbeddingPolicy {
    #[default]
    Error,
    ZeroVector,
}

/// One node-level graph: features `X`, adjacency `A` (symmetric, no
/// self-loops) and its normalized form `D^-1/2 (A + I) D^-1/2`.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub kind: SubgraphKind,
    pub features: Matrix,
    pub adjacency: SparseMatrix,
    pub normalized: Arc<SparseMatrix>,
}

impl Subgraph {
    pub fn new(kind: SubgraphKind, features: Matrix, adjacency: SparseMatrix) -> Result<Self> {
        let normalized = Arc::new(normalize_adjacency(&adjacency)?);
        Ok(Self {
            kind,
            features,
            adjacency,
            normalized,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Returns `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` holds the row sums of `A + I`.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::InvalidSparse(format!(
            "adjacency must be square, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let n = a.n_rows();
    let mut triples: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + n);
    let mut degree = vec![0.0f64; n];
    for i in 0..n {
        let mut diagonal_seen = false;
        for (j, w) in a.row(i) {
            let w = if i == j {
                diagonal_seen = true;
                w + 1.0
            } else {
                w
            };
            degree[i] += w;
            triples.push((i, j, w));
        }
        if !diagonal_seen {
            degree[i] += 1.0;
            triples.push((i, i, 1.0));
        }
    }
    if let Some((row, &d)) = degree.iter().enumerate().find(|(_, &d)| d <= 0.0) {
        return Err(Error::NonPositiveDegree { row, degree: d });
    }
    for t in &mut triples {
        t.2 /= (degree[t.0] * degree[t.1]).sqrt();
    }
    SparseMatrix::from_triples(n, n, triples)
}

/// Morpheme graph: pretrained vectors as features, windowed PMI edges.
pub fn build_morpheme_graph(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    window: usize,
    expected_dim: Option<usize>,
    policy: MissingEmbeddingPolicy,
) -> Result<Subgraph> {
    if let Some(d) = expected_dim {
        if embeddings.dim() != d {
            return Err(Error::EmbeddingDim {
                expected: d,
                found: embeddings.dim(),
            });
        }
    }
    let vocab = &corpus.morpheme_vocab;
    let dim = embeddings.dim();
    let mut features = Matrix::zeros(vocab.len(), dim);
    let mut missing = 0usize;
    for (i, token) in vocab.tokens().iter().enumerate() {
        match embeddings.get(token) {
            Some(row) => {
                for (dst, &v) in features.row_mut(i).iter_mut().zip(row) {
                    *dst = v as f64;
                }
            }
            None => match policy {
                MissingEmbeddingPolicy::Error => {
                    return Err(Error::MissingEmbedding {
                        kind: "morpheme",
                        token: token.clone(),
                    })
                }
                MissingEmbeddingPolicy::ZeroVector => {
                    warn!("no embedding for morpheme `{token}`; using a zero vector");
                    missing += 1;
                }
            },
        }
    }
    if missing > 0 {
        warn!("{missing} of {} morphemes fell back to zero vectors", vocab.len());
    }
    let adjacency = compute_windowed_pmi(corpus, TokenKind::Morpheme, window)?;
    Subgraph::new(SubgraphKind::Morpheme, features, adjacency)
}

/// POS graph: one-hot features, document-level PMI edges.
pub fn build_pos_graph(corpus: &Corpus) -> Result<Subgraph> {
    let adjacency = compute_document_pmi(corpus, TokenKind::Pos)?;
    Subgraph::new(SubgraphKind::Pos, Matrix::identity(corpus.pos_vocab.len()), adjacency)
}

/// Entity graph: entity vectors as features, thresholded cosine edges.
pub fn build_entity_graph(
    corpus: &Corpus,
    entity_embeddings: &EmbeddingTable,
    min_sim: f64,
) -> Result<Subgraph> {
    if !(-1.0..=1.0).contains(&min_sim) {
        return Err(Error::InvalidHyperparam(format!("entity min_sim {min_sim} outside [-1, 1]")));
    }
    let vocab = &corpus.entity_vocab;
    let mut features = Matrix::zeros(vocab.len(), entity_embeddings.dim());
    for (i, token) in vocab.tokens().iter().enumerate() {
        let row = entity_embeddings.get(token).ok_or_else(|| Error::MissingEmbedding {
            kind: "entity",
            token: token.clone(),
        })?;
        for (dst, &v) in features.row_mut(i).iter_mut().zip(row) {
            *dst = v as f64;
        }
    }
    let adjacency = cosine_adjacency(&features, min_sim, |i| vocab.token(i).to_string())?;
    Subgraph::new(SubgraphKind::Entity, features, adjacency)
}

/// All-pairs cosine similarity, keeping off-diagonal pairs with
/// `cos >= min_sim`.
pub fn cosine_adjacency(
    features: &Matrix,
    min_sim: f64,
    name: impl Fn(usize) -> String,
) -> Result<SparseMatrix> {
    let n = features.rows();
    let mut norms = Vec::with_capacity(n);
    for i in 0..n {
        let norm = features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormEntity(name(i)));
        }
        norms.push(norm);
    }
    let mut triples = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let cos = (crate::numerics::dot(features.row(i), features.row(j)) / (norms[i] * norms[j]))
                .clamp(-1.0, 1.0);
            if cos >= min_sim {
                triples.push((i, j, cos));
                triples.push((j, i, cos));
            }
        }
    }
    SparseMatrix::from_triples(n, n, triples)
}
