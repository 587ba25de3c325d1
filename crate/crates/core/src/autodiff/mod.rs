//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.

pub mod checkpoint;
pub mod dual;
mod gradcheck;
mod kernels;
pub(crate) use kernels::fourier_row;
mod tape;
mod tensor;

pub use dual::{Dual, Real};
pub use gradcheck::{grad_check, grad_check_many};
pub use tape::{Gradients, Tape, Var, POW_GRAD_FLOOR};
pub use tensor::Tensor;

#[cfg(test)]
pub(crate) use tape::{sigmoid, softplus};
