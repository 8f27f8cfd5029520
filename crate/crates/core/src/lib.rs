//! Corpus-to-QA dataset construction and evaluation toolkit.
//!
//! The pipeline runs in stages, each reading the previous stage's artifacts:
//!
//! - [`ingest`]: extract and normalize text from `.docx`, `.txt` and `.md` sources
//! - [`chunker`]: sentence-aligned sliding-window segmentation
//! - [`qagen`]: prompt construction and strict parsing of generated Q/A pairs
//! - [`dataset`]: dedup, augmentation, stratified split, loss-maskable records
//! - [`metrics`]: BLEU, ROUGE, token-F1, exact match, embedding similarity
//! - [`eval`]: model-under-test evaluation and report rendering
//!
//! [`gateway`] talks to chat-completion and embedding endpoints; [`pipeline`]
//! wires the stages to files for the `qa-forge` binary.

pub mod chunker;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod gateway;
pub mod ingest;
pub mod jsonl;
pub mod metrics;
pub mod pipeline;
pub mod qagen;

mod hashing;

pub use chunker::{chunk_document, Chunk, ChunkConfig};
pub use dataset::{DatasetRecord, SplitConfig, TrainingConfigExport};
pub use eval::{EvalConfig, EvalReport};
pub use gateway::{ChatRequest, ChatResponse, EmbeddingVector, Gateway, RetryPolicy};
pub use ingest::{Document, RawDocument};
pub use metrics::{JudgeThresholds, SampleMetrics};
pub use qagen::{QAPair, QAType};

/// Tool version recorded in every run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
