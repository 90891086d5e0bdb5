//! Reverse-mode automatic differentiation sufficient to differentiate a
//! multilayer perceptron composed with an unrolled simulation.

mod check;
mod gemm;
mod tape;

pub use check::grad_check;
pub use gemm::{gemm_nn_acc, transpose, transpose_into};
pub use tape::{Gradients, Tape, Var};
