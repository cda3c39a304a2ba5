//! Dense and sparse linear algebra with reverse-mode differentiation.

mod gradcheck;
mod matrix;
mod sparse;
mod tape;

pub use gradcheck::{analytic_gradients, check_gradients, relative_error, GradCheckReport};
pub use matrix::{dot, Matrix};
pub use sparse::SparseMatrix;
pub use tape::{l2_normalize, softmax_rows, Axis, Mode, Tape, Var, NORM_EPS};
