use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, AttentionVectors, GraphBundle, Subgraph};
use crate::model::{Hyperparams, ModelParameters};
use crate::numerics::{dot, softmax_rows, Matrix, Mode, SparseMatrix, Tape, Var};

/// `H = Ã · ReLU(Ã · drop(X) · W¹) · W²`, no biases and no output activation.
pub fn subgraph_gcn_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    graph: &Subgraph,
    w1: Var,
    w2: Var,
    dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    let x = tape.constant(graph.features.clone());
    gcn_two_layer(tape, x, &graph.normalized, w1, w2, dropout, mode, rng)
}

#[allow(clippy::too_many_arguments)]
fn gcn_two_layer<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    adj: &Arc<SparseMatrix>,
    w1: Var,
    w2: Var,
    dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    let x = tape.dropout(x, dropout, mode, rng)?;
    let xw = tape.matmul(x, w1)?;
    let axw = tape.sparse_matmul(Arc::clone(adj), xw)?;
    let hidden = tape.relu(axw)?;
    let hw = tape.matmul(hidden, w2)?;
    tape.sparse_matmul(Arc::clone(adj), hw)
}

/// Row `i` is `u(Hᵀ s_i)`, with all-zero rows left at zero.
pub fn pool_documents(tape: &mut Tape, node_embeddings: Var, attention: &AttentionVectors) -> Result<Var> {
    let pooled = tape.sparse_matmul(Arc::clone(&attention.weights), node_embeddings)?;
    tape.l2_normalize_rows(pooled)
}

/// Block concatenation in the order given.
pub fn concat_document_embeddings(tape: &mut Tape, blocks: &[Var]) -> Result<Var> {
    tape.concat_cols(blocks)
}

/// Off-diagonal pairs whose dot product reaches `delta`. Each pair is
/// computed once, so the result is exactly symmetric.
pub fn build_document_graph(x_s: &Matrix, delta: f64) -> SparseMatrix {
    const BLOCK: usize = 256;
    let n = x_s.rows();
    let mut triples = Vec::new();
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(n) {
                    let w = dot(x_s.row(i), x_s.row(j));
                    if w >= delta {
                        triples.push((i, j, w));
                        triples.push((j, i, w));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triples(n, n, triples).expect("document graph entries are valid")
}

/// Two-layer GCN over the document graph producing class logits.
#[allow(clippy::too_many_arguments)]
pub fn document_gcn_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    x_s: Var,
    normalized_doc_graph: &Arc<SparseMatrix>,
    w1: Var,
    w2: Var,
    dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    gcn_two_layer(tape, x_s, normalized_doc_graph, w1, w2, dropout, mode, rng)
}

#[derive(Debug, Clone)]
pub struct ForwardOutputs {
    /// Concatenated pooled embeddings, `N x (k·h)`.
    pub doc_embeddings: Var,
    /// Thresholded document graph built from the current embeddings; a
    /// constant with respect to differentiation.
    pub doc_graph: SparseMatrix,
    pub logits: Var,
}

/// Full forward pass on an existing tape. `vars` must hold the parameters in
/// the order of `params.names()`; their values are read from the tape.
/// `fixed_doc_graph` replaces the document graph that would otherwise be
/// rebuilt from the current embeddings.
#[allow(clippy::too_many_arguments)]
pub fn forward_on_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    bundle: &GraphBundle,
    params: &ModelParameters,
    vars: &[Var],
    hyper: &Hyperparams,
    mode: Mode,
    rng: &mut R,
    fixed_doc_graph: Option<&SparseMatrix>,
) -> Result<ForwardOutputs> {
    if vars.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter vars, got {}",
            params.len(),
            vars.len()
        )));
    }
    let var_of = |name: &str| {
        params
            .position(name)
            .map(|i| vars[i])
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    };

    let mut blocks = Vec::new();
    for kind in hyper.subgraphs.kinds() {
        let w1 = var_of(&format!("{}.w1", kind.as_str()))?;
        let w2 = var_of(&format!("{}.w2", kind.as_str()))?;
        let h = subgraph_gcn_forward(tape, bundle.subgraph(kind), w1, w2, hyper.dropout, mode, rng)?;
        blocks.push(pool_documents(tape, h, bundle.attention(kind))?);
    }
    let x_s = concat_document_embeddings(tape, &blocks)?;
    let doc_graph = match fixed_doc_graph {
        Some(g) => g.clone(),
        None => build_document_graph(tape.value(x_s), hyper.delta),
    };
    let normalized = Arc::new(normalize_adjacency(&doc_graph)?);
    let logits = document_gcn_forward(
        tape,
        x_s,
        &normalized,
        var_of("document.w1")?,
        var_of("document.w2")?,
        hyper.dropout,
        mode,
        rng,
    )?;
    Ok(ForwardOutputs {
        doc_embeddings: x_s,
        doc_graph,
        logits,
    })
}

/// A forward pass on a fresh tape with the parameters registered as leaves.
pub struct ForwardPass {
    pub tape: Tape,
    pub param_vars: Vec<Var>,
    pub outputs: ForwardOutputs,
}

impl ForwardPass {
    pub fn logits(&self) -> &Matrix {
        self.tape.value(self.outputs.logits)
    }

    pub fn doc_embeddings(&self) -> &Matrix {
        self.tape.value(self.outputs.doc_embeddings)
    }
}

pub fn full_forward<R: Rng + ?Sized>(
    bundle: &GraphBundle,
    params: &ModelParameters,
    hyper: &Hyperparams,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardPass> {
    let mut tape = Tape::new();
    let param_vars: Vec<Var> = params.values().iter().map(|m| tape.param(m.clone())).collect();
    let outputs = forward_on_tape(&mut tape, bundle, params, &param_vars, hyper, mode, rng, None)?;
    Ok(ForwardPass {
        tape,
        param_vars,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub probabilities: Matrix,
}

/// Row-wise argmax (lowest index wins ties) and softmax probabilities.
pub fn predict(logits: &Matrix) -> Prediction {
    Prediction {
        classes: argmax_rows(logits),
        probabilities: softmax_rows(logits),
    }
}

pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let mut best = 0;
            for (j, &v) in m.row(i).iter().enumerate() {
                if v > m.row(i)[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
