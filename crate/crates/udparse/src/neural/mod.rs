//! A small reverse-mode automatic differentiation core.
//!
//! The design is deliberately minimal: parameters live in a [`ParamSet`],
//! every forward pass records vector-valued operations on a fresh [`Tape`],
//! and [`Tape::backward`] walks the recording in reverse to accumulate
//! gradients into the parameter store. All arithmetic is `f64`.
//!
//! ```
//! use udparse::neural::{ParamSet, Tape, Tensor};
//!
//! let mut params = ParamSet::new();
//! let w = params.add("w", Tensor::matrix(1, 2, vec![3.0, -2.0]), true);
//! let mut tape = Tape::new();
//! let x = tape.constant(vec![0.5, 1.0]);
//! let y = tape.param_matvec(&params, w, x);   // y = 3*0.5 - 2*1.0 = -0.5
//! let loss = tape.sum(y);
//! tape.backward(&mut params, loss).unwrap();
//! assert_eq!(params.get(w).grad.data, vec![0.5, 1.0]); // dL/dW = x
//! ```
//!
//! On top of the tape sit standard building blocks: [`BiLstm`] (stacked
//! bidirectional LSTM layers), [`Mlp`] (one tanh hidden layer with a linear
//! output), the [`Adam`] optimizer, and [`grad_check`] for validating
//! gradients against central finite differences.

mod adam;
mod check;
mod lstm;
mod mlp;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use check::{grad_check, GradCheckReport};
pub use lstm::{BiLstm, BiLstmSpec};
pub use mlp::Mlp;
pub use params::{glorot, ParamId, ParamSet, Parameter};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("parameter `{name}` registered twice")]
    DuplicateParam { name: String },
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch { op: &'static str, left: usize, right: usize },
    #[error("backward called twice on the same tape")]
    BackwardReused,
    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },
}
