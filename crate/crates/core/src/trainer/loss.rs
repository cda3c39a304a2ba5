use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tape, Var};

/// Floor applied to probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-Σ_k ln softmax(logits)[indices[k], targets[k]]`, a sum over the labeled
/// documents.
pub fn cross_entropy_loss(tape: &mut Tape, logits: Var, indices: &[usize], targets: &[usize]) -> Result<Var> {
    if indices.is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    if indices.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy_loss",
            left: (indices.len(), 1),
            right: (targets.len(), 1),
        });
    }
    let c = tape.value(logits).cols();
    let mut onehot = Matrix::zeros(indices.len(), c);
    for (k, &t) in targets.iter().enumerate() {
        if t >= c {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy_loss",
                left: (indices.len(), c),
                right: (k, t),
            });
        }
        onehot[(k, t)] = 1.0;
    }
    let probs = tape.softmax_rows(logits)?;
    let labeled = tape.gather_rows(probs, indices)?;
    let picked = tape.mul_const(labeled, onehot)?;
    let true_prob = tape.sum_rows(picked)?;
    let logs = tape.log_clamped(true_prob, PROB_FLOOR)?;
    let total = tape.sum(logs)?;
    tape.scale(total, -1.0)
}

/// `l_ce + lambda * l_con`.
pub fn unified_loss(tape: &mut Tape, l_ce: Var, l_con: Var, lambda: f64) -> Result<Var> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidHyperparam(format!("lambda {lambda} must be non-negative")));
    }
    let weighted = tape.scale(l_con, lambda)?;
    tape.add(l_ce, weighted)
}
