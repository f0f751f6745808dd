//! Experiment runner: run configuration, training loop with evaluation and
//! output files, the budget × objective matrix and the task metrics.

mod config;
pub use config::{Budget, DataSource, FileSources, Language, RunConfig, Task};

mod matrix;
pub use matrix::{cell_seed, run_matrix, MatrixTable};

mod metrics;
pub use metrics::{sentence_accuracy, token_accuracy};

mod runner;
pub use runner::{
    evaluate, load_bundle, metric_names, read_corpus, run_experiment, run_on_bundle, summary_tsv, task_kind,
    vocab_sizes, EpochRecord, Evaluation, RunResult, SavedModel,
};

use thiserror::Error;

use crate::{autodiff, data, model, parsing};

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Data(#[from] data::Error),

    #[error(transparent)]
    Model(#[from] model::Error),

    #[error(transparent)]
    Parsing(#[from] parsing::Error),

    #[error("gold and predicted data differ: {0}")]
    Misaligned(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn is_non_finite(&self) -> bool {
        matches!(self, Error::Model(e) if e.is_non_finite())
    }

    /// Process exit status: 3 for a NaN abort, 2 for configuration and data
    /// problems, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            _ if self.is_non_finite() => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

impl From<autodiff::Error> for Error {
    fn from(e: autodiff::Error) -> Self {
        Error::Model(model::Error::Autodiff(e))
    }
}
