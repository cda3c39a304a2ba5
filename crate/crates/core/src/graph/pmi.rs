//! Positive pointwise mutual information over co-occurrence units.
//!
//! A unit is either a sliding window over a document's token sequence or the
//! whole document. Presence inside a unit is binary. With `W` units,
//! `p(i) = #units containing i / W` and `p(i, j) = #units containing both / W`;
//! an edge `ln(p(i, j) / (p(i) p(j)))` is kept only when strictly positive.

use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// Which token sequence of a corpus to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Morpheme,
    Pos,
}

fn sequences(corpus: &Corpus, kind: TokenKind) -> (Vec<Vec<usize>>, usize) {
    match kind {
        TokenKind::Morpheme => (corpus.morpheme_ids(), corpus.morpheme_vocab.len()),
        TokenKind::Pos => (corpus.pos_ids(), corpus.pos_vocab.len()),
    }
}

/// Windowed PMI. A document of length `L` contributes `max(1, L - window + 1)`
/// windows, so documents shorter than the window count exactly once.
pub fn compute_windowed_pmi(corpus: &Corpus, kind: TokenKind, window: usize) -> Result<SparseMatrix> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (seqs, n_vocab) = sequences(corpus, kind);
    windowed_pmi(&seqs, n_vocab, window)
}

/// PMI with whole documents as the co-occurrence unit (`W = N`).
pub fn compute_document_pmi(corpus: &Corpus, kind: TokenKind) -> Result<SparseMatrix> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (seqs, n_vocab) = sequences(corpus, kind);
    Ok(pmi_from_units(seqs.iter().map(|s| s.as_slice()), n_vocab))
}

pub fn windowed_pmi(seqs: &[Vec<usize>], n_vocab: usize, window: usize) -> Result<SparseMatrix> {
    if window == 0 {
        return Err(Error::InvalidHyperparam("window must be at least 1".into()));
    }
    let units = seqs.iter().flat_map(|s| {
        let count = if s.len() <= window { 1 } else { s.len() - window + 1 };
        (0..count).map(move |start| &s[start..(start + window).min(s.len())])
    });
    Ok(pmi_from_units(units, n_vocab))
}

fn pmi_from_units<'a>(units: impl Iterator<Item = &'a [usize]>, n_vocab: usize) -> SparseMatrix {
    let mut total = 0u64;
    let mut single = vec![0u64; n_vocab];
    let mut pair: HashMap<(usize, usize), u64> = HashMap::new();
    let mut present: Vec<usize> = Vec::new();
    for unit in units {
        total += 1;
        present.clear();
        present.extend_from_slice(unit);
        present.sort_unstable();
        present.dedup();
        for (a, &i) in present.iter().enumerate() {
            single[i] += 1;
            for &j in &present[a + 1..] {
                *pair.entry((i, j)).or_default() += 1;
            }
        }
    }
    let w = total as f64;
    let mut triples = Vec::new();
    for ((i, j), c) in pair {
        let p_ij = c as f64 / w;
        let p_i = single[i] as f64 / w;
        let p_j = single[j] as f64 / w;
        let pmi = (p_ij / (p_i * p_j)).ln();
        if pmi > 0.0 {
            triples.push((i, j, pmi));
            triples.push((j, i, pmi));
        }
    }
    SparseMatrix::from_triples(n_vocab, n_vocab, triples).expect("pmi entries are unique and finite")
}
