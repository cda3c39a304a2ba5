//! Pseudo-topic contrastive objective over document embeddings.

use crate::error::{Error, Result};
use crate::model::argmax_rows;
use crate::numerics::{softmax_rows, Matrix, Tape, Var};

/// Per-document topic distributions and their argmax pseudo-topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicAssignment {
    pub distributions: Matrix,
    pub topics: Vec<usize>,
}

/// Softmax of each logit row and its argmax (lowest index on ties). Works on
/// plain values, so nothing here is differentiated.
pub fn assign_pseudo_topics(logits: &Matrix) -> TopicAssignment {
    TopicAssignment {
        distributions: softmax_rows(logits),
        topics: argmax_rows(logits),
    }
}

/// Positive and candidate sets for every document in `scope`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairs {
    /// Participating document indices, in ascending order.
    pub scope: Vec<usize>,
    /// `positives[k]`: documents sharing the pseudo-topic of `scope[k]`.
    pub positives: Vec<Vec<usize>>,
    /// `candidates[k]`: `scope` without `scope[k]`.
    pub candidates: Vec<Vec<usize>>,
}

impl Pairs {
    pub fn len(&self) -> usize {
        self.scope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scope.is_empty()
    }
}

pub fn form_pairs(assignment: &TopicAssignment, scope: &[usize]) -> Pairs {
    let mut scope = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    let topics = &assignment.topics;
    let candidates: Vec<Vec<usize>> = scope
        .iter()
        .map(|&i| scope.iter().copied().filter(|&j| j != i).collect())
        .collect();
    let positives = scope
        .iter()
        .zip(&candidates)
        .map(|(&i, z)| z.iter().copied().filter(|&j| topics[j] == topics[i]).collect())
        .collect();
    Pairs {
        scope,
        positives,
        candidates,
    }
}

/// `(1/m) Σ_i L_i` over the `m` scope documents, with
/// `L_i = -(1/|P_i|) Σ_{p∈P_i} ln(exp(s_ip) / Σ_{a∈Z_i} exp(s_ia))`
/// and `s = cos / temperature`. Documents without positives add 0.
pub fn contrastive_loss(tape: &mut Tape, x_s: Var, pairs: &Pairs, temperature: f64) -> Result<Var> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidHyperparam(format!(
            "temperature {temperature} must be positive"
        )));
    }
    let m = pairs.len();
    if m == 0 {
        return Ok(tape.constant(Matrix::scalar(0.0)));
    }
    let n = tape.value(x_s).rows();
    let mut local = vec![usize::MAX; n];
    for (k, &i) in pairs.scope.iter().enumerate() {
        local[i] = k;
    }

    let mut positive_weights = Matrix::zeros(m, m);
    let mut candidate_mask = Matrix::zeros(m, m);
    for k in 0..m {
        let p = &pairs.positives[k];
        if p.is_empty() {
            continue;
        }
        let w = 1.0 / p.len() as f64;
        for &j in p {
            positive_weights[(k, local[j])] = w;
        }
        for &j in &pairs.candidates[k] {
            candidate_mask[(k, local[j])] = 1.0;
        }
    }

    let rows = if m == n {
        x_s
    } else {
        tape.gather_rows(x_s, &pairs.scope)?
    };
    let cos = tape.cosine_similarity_matrix(rows)?;
    let sim = tape.scale(cos, 1.0 / temperature)?;
    let weighted = tape.mul_const(sim, positive_weights)?;
    let positive_sum = tape.sum(weighted)?;
    let lse = tape.masked_logsumexp_rows(sim, candidate_mask)?;
    let lse_sum = tape.sum(lse)?;
    let neg_positive = tape.scale(positive_sum, -1.0)?;
    let total = tape.add(lse_sum, neg_positive)?;
    tape.scale(total, 1.0 / m as f64)
}
