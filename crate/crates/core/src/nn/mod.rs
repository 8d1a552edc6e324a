//! A from-scratch fully connected regression network.

mod adam;
mod mlp;
mod train;

use thiserror::Error;

pub use adam::AdamState;
pub use mlp::{sigmoid, ForwardCache, MlpParams};
pub use train::{train, EpochLog, TrainConfig, TrainOutcome, TrainingLog};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("layers must have at least one unit")]
    EmptyLayer,
    #[error("invalid training setting {field} = {value}")]
    InvalidConfig { field: &'static str, value: f64 },
    #[error("training needs at least 10 records, got {0}")]
    TooFewRecords(usize),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
}
