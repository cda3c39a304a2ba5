use std::sync::Arc;

use crate::corpus::Corpus;
use crate::graph::pmi::TokenKind;
use crate::graph::SubgraphKind;
use crate::numerics::SparseMatrix;

/// Per-document node weights used for pooling, stored as an
/// `N x |V|` sparse matrix whose row `i` is the vector for document `i`.
#[derive(Debug, Clone)]
pub struct AttentionVectors {
    pub kind: SubgraphKind,
    pub weights: Arc<SparseMatrix>,
}

impl AttentionVectors {
    pub fn num_documents(&self) -> usize {
        self.weights.n_rows()
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.n_cols()
    }
}

/// `tf(j, i) * ln(N / df(j))` with raw counts; zero-count entries are omitted.
pub fn compute_tfidf_attention(corpus: &Corpus, kind: TokenKind) -> AttentionVectors {
    let (seqs, n_vocab, subgraph) = match kind {
        TokenKind::Morpheme => (corpus.morpheme_ids(), corpus.morpheme_vocab.len(), SubgraphKind::Morpheme),
        TokenKind::Pos => (corpus.pos_ids(), corpus.pos_vocab.len(), SubgraphKind::Pos),
    };
    let n_docs = seqs.len();
    let mut df = vec![0usize; n_vocab];
    let mut tf_rows: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n_docs);
    for seq in &seqs {
        let mut sorted = seq.clone();
        sorted.sort_unstable();
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for t in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => counts.push((t, 1)),
            }
        }
        for &(t, _) in &counts {
            df[t] += 1;
        }
        tf_rows.push(counts);
    }
    let mut triples = Vec::new();
    for (i, counts) in tf_rows.into_iter().enumerate() {
        for (j, tf) in counts {
            let idf = (n_docs as f64 / df[j] as f64).ln();
            triples.push((i, j, tf as f64 * idf));
        }
    }
    AttentionVectors {
        kind: subgraph,
        weights: Arc::new(
            SparseMatrix::from_triples(n_docs, n_vocab, triples).expect("tf-idf entries are valid"),
        ),
    }
}

/// 1 where the entity occurs in the document, absent otherwise.
pub fn compute_entity_attention(corpus: &Corpus) -> AttentionVectors {
    let mut triples = Vec::new();
    for (i, ids) in corpus.entity_ids().into_iter().enumerate() {
        for j in ids {
            triples.push((i, j, 1.0));
        }
    }
    triples.sort_unstable_by_key(|t| (t.0, t.1));
    triples.dedup_by_key(|t| (t.0, t.1));
    AttentionVectors {
        kind: SubgraphKind::Entity,
        weights: Arc::new(
            SparseMatrix::from_triples(corpus.len(), corpus.entity_vocab.len(), triples)
                .expect("membership entries are valid"),
        ),
    }
}
