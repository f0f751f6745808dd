//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Graphs are rebuilt for every example (define-by-run). Parameters live in
//! a [`ParamStore`] that graphs borrow immutably; backward passes add into a
//! separate [`Gradients`] buffer, which the optimizer consumes.

mod graph;
pub use graph::{sigmoid, softplus, Graph, Var};

mod params;
pub use params::{Gradients, Group, Param, ParamId, ParamStore};

mod tensor;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor shape {shape:?}")]
    InvalidShape { shape: Vec<usize> },

    #[error("shape {shape:?} does not hold {len} values")]
    LengthMismatch { shape: Vec<usize>, len: usize },

    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },

    #[error("loss must be a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("gradient reversal scale must be a finite non-negative number, got {0}")]
    NegativeLambda(f64),

    #[error("gold class {gold} is masked out")]
    MaskedGold { gold: usize },

    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("node {0} does not belong to this graph")]
    UnknownNode(usize),
}
