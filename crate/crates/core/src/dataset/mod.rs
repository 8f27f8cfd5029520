//! Cleaning, augmentation, splitting and serialization of Q/A pairs.

mod augment;
mod dedup;
mod record;
mod split;
mod training;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::metrics::MetricError;

pub use augment::{augment_pairs, paraphrase_prompt, AugmentDiagnostic, AugmentOutput, AugmentSettings};
pub use dedup::{dedup_pairs, dedup_pairs_embedding, question_key};
pub use record::{
    parse_record_text, serialize_record, DatasetRecord, SplitName, ASSISTANT_DELIMITER,
    DEFAULT_TRAINING_SYSTEM_PROMPT, SYSTEM_DELIMITER, USER_DELIMITER,
};
pub use split::{cell_counts, split_dataset, stratum_test_count, Split, SplitConfig, StratifyKey, Stratum};
pub use training::{export_training_config, read_training_config, TrainingConfigExport, LORA_RANKS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("near-duplicate threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("split of {0} pairs leaves the test set empty")]
    DegenerateSplit(usize),
    #[error("invalid dataset configuration: {0}")]
    InvalidConfig(String),
    #[error("{field} contains the reserved delimiter {delimiter}")]
    DelimiterCollision {
        field: &'static str,
        delimiter: &'static str,
    },
    #[error("cannot write {path}: {reason}")]
    WriteFailure { path: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    ReadFailure { path: String, reason: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}
