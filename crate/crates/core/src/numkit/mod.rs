//! Dense matrices, a reverse-mode tape, and a finite-difference checker.

mod gradcheck;
mod init;
mod matrix;
mod tape;

pub use gradcheck::{grad_check, grad_check_sampled};
pub use init::{init_with, seeded_init, InitScheme};
pub use matrix::{linear, matmul, matmul_t, softmax_rows, Matrix};
pub use tape::{Gradients, Tape, Var};
