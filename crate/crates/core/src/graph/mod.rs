//! Heterogeneous subgraph construction: morpheme, POS and entity graphs,
//! their pooling weights, and an on-disk bundle format.

mod attention;
mod builder;
mod pmi;
mod stats;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

pub use attention::{compute_entity_attention, compute_tfidf_attention, AttentionVectors};
pub use builder::{
    build_entity_graph, build_morpheme_graph, build_pos_graph, cosine_adjacency, normalize_adjacency,
    MissingEmbeddingPolicy, Subgraph, SubgraphKind,
};
pub use pmi::{compute_document_pmi, compute_windowed_pmi, windowed_pmi, TokenKind};
pub use stats::{graph_stats, StatsReport, SubgraphStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub window: usize,
    pub entity_min_sim: f64,
    /// Required morpheme embedding width, when known up front.
    pub morpheme_dim: Option<usize>,
    pub missing_embedding: MissingEmbeddingPolicy,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            window: 5,
            entity_min_sim: 0.5,
            morpheme_dim: None,
            missing_embedding: MissingEmbeddingPolicy::Error,
        }
    }
}

/// The three subgraphs of a corpus plus the per-document pooling weights.
#[derive(Debug, Clone)]
pub struct GraphBundle {
    pub morpheme: Subgraph,
    pub pos: Subgraph,
    pub entity: Subgraph,
    pub morpheme_attention: AttentionVectors,
    pub pos_attention: AttentionVectors,
    pub entity_attention: AttentionVectors,
}

impl GraphBundle {
    pub fn subgraph(&self, kind: SubgraphKind) -> &Subgraph {
        match kind {
            SubgraphKind::Morpheme => &self.morpheme,
            SubgraphKind::Pos => &self.pos,
            SubgraphKind::Entity => &self.entity,
        }
    }

    pub fn attention(&self, kind: SubgraphKind) -> &AttentionVectors {
        match kind {
            SubgraphKind::Morpheme => &self.morpheme_attention,
            SubgraphKind::Pos => &self.pos_attention,
            SubgraphKind::Entity => &self.entity_attention,
        }
    }

    pub fn subgraphs(&self) -> impl Iterator<Item = &Subgraph> {
        SubgraphKind::ALL.into_iter().map(|k| self.subgraph(k))
    }

    pub fn num_documents(&self) -> usize {
        self.morpheme_attention.num_documents()
    }

    /// Writes `adjacency_<kind>.txt`, `normalized_<kind>.txt` and
    /// `attention_<kind>.txt` for each subgraph into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for kind in SubgraphKind::ALL {
            let g = self.subgraph(kind);
            let name = kind.as_str();
            write_sparse(&g.adjacency, &dir.join(format!("adjacency_{name}.txt")))?;
            write_sparse(&g.normalized, &dir.join(format!("normalized_{name}.txt")))?;
            write_sparse(&self.attention(kind).weights, &dir.join(format!("attention_{name}.txt")))?;
        }
        Ok(())
    }
}

pub fn build_graphs(
    corpus: &Corpus,
    morpheme_embeddings: &EmbeddingTable,
    entity_embeddings: &EmbeddingTable,
    config: &GraphConfig,
) -> Result<GraphBundle> {
    Ok(GraphBundle {
        morpheme: build_morpheme_graph(
            corpus,
            morpheme_embeddings,
            config.window,
            config.morpheme_dim,
            config.missing_embedding,
        )?,
        pos: build_pos_graph(corpus)?,
        entity: build_entity_graph(corpus, entity_embeddings, config.entity_min_sim)?,
        morpheme_attention: compute_tfidf_attention(corpus, TokenKind::Morpheme),
        pos_attention: compute_tfidf_attention(corpus, TokenKind::Pos),
        entity_attention: compute_entity_attention(corpus),
    })
}

/// Text triple format: header `n_rows n_cols n_entries`, then one
/// `row col weight` line per entry in row-major order.
pub fn write_sparse(m: &SparseMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (i, j, w) in m.iter() {
        writeln!(out, "{i} {j} {w}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sparse(path: &Path) -> Result<SparseMatrix> {
    let bad = |msg: String| Error::Bundle(format!("{}: {msg}", path.display()));
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().ok_or_else(|| bad("missing header".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad header `{header}`"))))
        .collect::<Result<_>>()?;
    let [n_rows, n_cols, n_entries] = dims[..] else {
        return Err(bad(format!("bad header `{header}`")));
    };
    let mut triples = Vec::with_capacity(n_entries);
    for (k, line) in lines.enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let parse_err = || bad(format!("bad entry on line {}", k + 2));
        let i: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(parse_err)?;
        let j: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(parse_err)?;
        let w: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(parse_err)?;
        triples.push((i, j, w));
    }
    if triples.len() != n_entries {
        return Err(bad(format!("header lists {n_entries} entries, found {}", triples.len())));
    }
    SparseMatrix::from_triples(n_rows, n_cols, triples)
}
