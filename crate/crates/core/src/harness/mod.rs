//! Data loading, scaffold splits, training, grid search and performance profiles.

mod dataset;
mod grid;
mod profile;
mod split;
mod synthetic;
mod train;

use std::fmt::Display;
use std::path::Path;

pub use dataset::{load_csv, write_csv, Dataset, Record, Rejection};
pub use grid::{derive_seed, grid_search, thread_pool, write_results, GridCell, GridSpec, GridReport, RunResult};
pub use profile::{load_table, performance_profile, write_profile, MaeTable, ModelProfile, Profile};
pub use split::{make_split, SplitPlan, BIN_COUNT, FOLD_COUNT, TEST_FRACTION};
pub use synthetic::{donor_count, fuzz_corpus, random_smiles, synthetic_records, synthetic_target};
pub use train::{evaluate, mean_absolute_error, train, EpochMetrics, TrainConfig, TrainOutcome, TrainedModel};

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("no usable records")]
    EmptyDataset,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss { epoch: usize, batch: usize, detail: String },
    #[error("checkpoint featurization `{found}` does not match `{expected}`")]
    VersionMismatch { expected: String, found: String },
    #[error("incomplete table: {0}")]
    IncompleteTable(String),
    #[error("invalid training or grid configuration: {0}")]
    Config(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl HarnessError {
    pub fn io(path: &Path, e: impl Display) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Json(e.to_string())
    }
}
