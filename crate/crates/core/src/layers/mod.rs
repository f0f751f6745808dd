//! Neural building blocks: embedding bank, bi-LSTM feature generator and
//! feed-forward heads.

mod embedding;
pub use embedding::{EmbeddingBank, EmbeddingDims};

mod ffn;
pub use ffn::{Activation, Dense, Ffn};

mod lstm;
pub use lstm::{BiLstm, LstmCell};

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{self, Tensor};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff::Error),

    #[error("cannot encode an empty sequence")]
    EmptySequence,

    #[error("input {position} has dimension {found}, expected {expected}")]
    InputDimension {
        position: usize,
        expected: usize,
        found: usize,
    },
}

/// Matrix with entries uniform in `±sqrt(6 / (rows + cols))`.
pub fn glorot_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::matrix(rows, cols, values).expect("positive dimensions")
}
