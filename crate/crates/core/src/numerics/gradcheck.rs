//! Central-difference verification of tape gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tape, Var};

/// Entries whose one-sided slopes disagree by more than this fraction are
/// treated as sitting on a non-differentiable point and skipped.
const KINK_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat entry index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub excluded: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

fn evaluate<F>(f: &F, inputs: &[Matrix]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let shape = tape.value(out).shape();
    if shape != (1, 1) {
        return Err(Error::NonScalarLoss(shape));
    }
    Ok(tape.value(out)[(0, 0)])
}

/// Analytic gradients of the scalar function `f` at `inputs`.
pub fn analytic_gradients<F>(f: &F, inputs: &[Matrix]) -> Result<(f64, Vec<Matrix>)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let value = tape.value(out)[(0, 0)];
    let grads = vars
        .iter()
        .zip(inputs)
        .map(|(&v, m)| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()))
        })
        .collect();
    Ok((value, grads))
}

/// Compares the tape gradient of `f` with central differences for every
/// entry of every input. `f` must rebuild its computation from the supplied
/// input vars and be deterministic.
pub fn check_gradients<F>(f: F, inputs: &[Matrix], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (base, analytic) = analytic_gradients(&f, inputs)?;
    let again = evaluate(&f, inputs)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::NonDeterministic {
            first: base,
            second: again,
        });
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        excluded: 0,
    };
    let mut probe: Vec<Matrix> = inputs.to_vec();
    for (k, grad) in analytic.iter().enumerate() {
        for e in 0..grad.as_slice().len() {
            let original = probe[k].as_slice()[e];
            probe[k].as_mut_slice()[e] = original + step;
            let plus = evaluate(&f, &probe)?;
            probe[k].as_mut_slice()[e] = original - step;
            let minus = evaluate(&f, &probe)?;
            probe[k].as_mut_slice()[e] = original;

            let right = (plus - base) / step;
            let left = (base - minus) / step;
            if (right - left).abs() > KINK_TOLERANCE * f64::max(right.abs() + left.abs(), 1e-6) {
                report.excluded += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grad.as_slice()[e], numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((k, e));
            }
        }
    }
    Ok(report)
}
