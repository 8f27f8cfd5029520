//! File-based stage runner behind the `qa-forge` binary.
//!
//! Every stage reads the artifacts of the stage before it from `output_dir`,
//! writes its own, and leaves a `manifest_<stage>.json` naming the config,
//! seed, counts and tool version. Artifacts carry no timestamps, so a re-run
//! with the same inputs and seed reproduces them byte for byte.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::chunker::{chunk_corpus, Chunk};
use crate::config::{ConfigError, DedupMode, PipelineConfig};
use crate::dataset::{
    augment_pairs, cell_counts, dedup_pairs, dedup_pairs_embedding, export_training_config, serialize_record,
    split_dataset, DatasetError, DatasetRecord, SplitName,
};
use crate::eval::{compare_models, evaluate_model, parse_report, render_report, EvalError, EvalReport};
use crate::gateway::{ChatRequest, ChatResponse, Gateway, GatewayError, HttpTransport, Transport, TransportError};
use crate::hashing::digest_parts;
use crate::ingest::{load_manifest_corpus, Document, IngestError};
use crate::jsonl::{read_records, write_records, JsonlError};
use crate::metrics::MetricError;
use crate::qagen::{generate_all, QAPair};

pub const DOCUMENTS: &str = "documents.jsonl";
pub const CHUNKS: &str = "chunks.jsonl";
pub const QA_PAIRS: &str = "qa_pairs.jsonl";
pub const GENERATION_DIAGNOSTICS: &str = "generation_diagnostics.jsonl";
pub const AUGMENT_DIAGNOSTICS: &str = "augment_diagnostics.jsonl";
pub const TRAIN: &str = "train.jsonl";
pub const TEST: &str = "test.jsonl";
pub const TRAINING_CONFIG: &str = "training_config.toml";
pub const EVAL_SAMPLES: &str = "eval_samples.jsonl";
pub const EVAL_REPORT_JSON: &str = "eval_report.json";
pub const EVAL_REPORT_TEXT: &str = "eval_report.txt";
pub const COMPARISON_TEXT: &str = "comparison.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Chunk,
    Generate,
    Build,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Chunk,
        Stage::Generate,
        Stage::Build,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Chunk => "chunk",
            Stage::Generate => "generate",
            Stage::Build => "build",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    /// Artifacts that must exist before the stage can run, with the stage
    /// that produces each.
    pub fn inputs(self) -> &'static [(&'static str, Stage)] {
        match self {
            Stage::Ingest => &[],
            Stage::Chunk => &[(DOCUMENTS, Stage::Ingest)],
            Stage::Generate => &[(CHUNKS, Stage::Chunk)],
            Stage::Build => &[(CHUNKS, Stage::Chunk), (QA_PAIRS, Stage::Generate)],
            Stage::Evaluate => &[(TEST, Stage::Build)],
            Stage::Report => &[(EVAL_REPORT_JSON, Stage::Evaluate)],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("stage `{stage}` needs {path}, which stage `{producer}` writes; run `qa-forge {producer}` first")]
    MissingArtifact {
        stage: Stage,
        path: String,
        producer: Stage,
    },
    #[error("cannot access {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("cannot set up endpoint client: {0}")]
    Client(String),
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    /// True when the failure is the endpoint's, not the input's.
    pub fn is_endpoint_failure(&self) -> bool {
        let gateway = match self {
            PipelineError::Gateway(g) => Some(g),
            PipelineError::Eval(EvalError::Gateway(g)) => Some(g),
            PipelineError::Eval(EvalError::Metric(MetricError::Gateway(g))) => Some(g),
            PipelineError::Dataset(DatasetError::Gateway(g)) => Some(g),
            PipelineError::Dataset(DatasetError::Metric(MetricError::Gateway(g))) => Some(g),
            PipelineError::Client(_) => return true,
            _ => None,
        };
        gateway.is_some_and(|g| {
            matches!(
                g,
                GatewayError::EndpointUnreachable { .. }
                    | GatewayError::AuthRejected(_)
                    | GatewayError::Throttled { .. }
                    | GatewayError::MalformedResponse(_)
            )
        })
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_endpoint_failure() {
            2
        } else {
            1
        }
    }
}

/// Chat and embedding traffic sent to different transports.
struct Routed {
    chat: Arc<dyn Transport>,
    embed: Arc<dyn Transport>,
}

impl Transport for Routed {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.chat.chat(req)
    }

    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
        self.embed.embed(model, texts)
    }
}

#[derive(Debug, Serialize)]
struct FileDigest {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    stage: &'static str,
    tool_version: &'static str,
    seed: u64,
    config: &'a PipelineConfig,
    counts: Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    transport: Option<Arc<dyn Transport>>,
    eval_transport: Option<Arc<dyn Transport>>,
    /// Extra reports for the comparison table.
    compare: Vec<PathBuf>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        Self {
            cfg,
            transport: None,
            eval_transport: None,
            compare: Vec::new(),
        }
    }

    /// Replace the HTTP client for generation, augmentation and embeddings.
    pub fn with_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.transport = Some(t);
        self
    }

    /// Replace the HTTP client for the model under test.
    pub fn with_eval_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.eval_transport = Some(t);
        self
    }

    pub fn with_comparison(mut self, reports: Vec<PathBuf>) -> Self {
        self.compare = reports;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    /// Fail with a stage-dependency diagnostic if an input is missing.
    pub fn check_inputs(&self, stage: Stage) -> Result<(), PipelineError> {
        for (name, producer) in stage.inputs() {
            let path = self.artifact(name);
            if !path.is_file() {
                return Err(PipelineError::MissingArtifact {
                    stage,
                    path: path.display().to_string(),
                    producer: *producer,
                });
            }
        }
        if stage == Stage::Ingest && !self.cfg.corpus_manifest.is_file() {
            return Err(PipelineError::Io {
                path: self.cfg.corpus_manifest.display().to_string(),
                reason: "corpus manifest not found".into(),
            });
        }
        Ok(())
    }

    pub fn run_stage(&self, stage: Stage) -> Result<String, PipelineError> {
        self.check_inputs(stage)?;
        std::fs::create_dir_all(&self.cfg.output_dir).map_err(|e| PipelineError::Io {
            path: self.cfg.output_dir.display().to_string(),
            reason: e.to_string(),
        })?;
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Chunk => self.chunk(),
            Stage::Generate => self.generate(),
            Stage::Build => self.build(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
        }
    }

    /// Run `from` and every later stage in order.
    pub fn run_from(&self, from: Stage) -> Result<Vec<String>, PipelineError> {
        Stage::ALL
            .into_iter()
            .filter(|s| *s >= from)
            .map(|s| self.run_stage(s))
            .collect()
    }

    fn gateway(&self, eval: bool) -> Result<Gateway, PipelineError> {
        let timeout = Duration::from_secs(self.cfg.request_timeout_secs);
        let http = |base: &str| -> Result<Arc<dyn Transport>, PipelineError> {
            let t = HttpTransport::from_env(base, timeout).map_err(|e| PipelineError::Client(format!("{e:?}")))?;
            Ok(Arc::new(t))
        };
        let main = match &self.transport {
            Some(t) => t.clone(),
            None => http(&self.cfg.endpoint_base)?,
        };
        let transport: Arc<dyn Transport> = if eval {
            let chat = match (&self.eval_transport, &self.transport) {
                (Some(t), _) => t.clone(),
                (None, Some(t)) => t.clone(),
                (None, None) if self.cfg.eval_endpoint_base == self.cfg.endpoint_base => main.clone(),
                (None, None) => http(&self.cfg.eval_endpoint_base)?,
            };
            Arc::new(Routed { chat, embed: main })
        } else {
            main
        };
        Ok(Gateway::new(transport, self.cfg.retry)?.with_embedding_model(self.cfg.embedding_model.clone()))
    }

    fn write_manifest(&self, stage: Stage, counts: Value, outputs: &[&str]) -> Result<(), PipelineError> {
        let digest = |path: &Path, label: String| -> Result<FileDigest, PipelineError> {
            let bytes = std::fs::read(path).map_err(|e| PipelineError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            Ok(FileDigest {
                file: label,
                sha256: digest_parts([bytes]),
            })
        };
        let mut inputs = Vec::new();
        if stage == Stage::Ingest {
            inputs.push(digest(&self.cfg.corpus_manifest, self.cfg.corpus_manifest.display().to_string())?);
        }
        for (name, _) in stage.inputs() {
            inputs.push(digest(&self.artifact(name), name.to_string())?);
        }
        let outputs = outputs
            .iter()
            .map(|name| digest(&self.artifact(name), name.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let manifest = RunManifest {
            stage: stage.as_str(),
            tool_version: crate::VERSION,
            seed: self.cfg.seed,
            config: &self.cfg,
            counts,
            inputs,
            outputs,
        };
        let path = self.artifact(&format!("manifest_{stage}.json"));
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_file(&path, &text)
    }

    fn ingest(&self) -> Result<String, PipelineError> {
        let docs = load_manifest_corpus(&self.cfg.corpus_manifest)?;
        write_records(&self.artifact(DOCUMENTS), &docs)?;
        let mut per_species: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            *per_species.entry(&d.species).or_default() += 1;
        }
        let chars: usize = docs.iter().map(|d| d.char_count).sum();
        let counts = json!({ "documents": docs.len(), "characters": chars, "documents_per_species": per_species });
        self.write_manifest(Stage::Ingest, counts, &[DOCUMENTS])?;
        Ok(format!("ingest: {} documents, {} characters", docs.len(), chars))
    }

    fn chunk(&self) -> Result<String, PipelineError> {
        let docs: Vec<Document> = read_records(&self.artifact(DOCUMENTS))?;
        let chunks = chunk_corpus(&docs, &self.cfg.chunk);
        write_records(&self.artifact(CHUNKS), &chunks)?;
        let counts = json!({ "documents": docs.len(), "chunks": chunks.len() });
        self.write_manifest(Stage::Chunk, counts, &[CHUNKS])?;
        Ok(format!("chunk: {} chunks from {} documents", chunks.len(), docs.len()))
    }

    fn generate(&self) -> Result<String, PipelineError> {
        let chunks: Vec<Chunk> = read_records(&self.artifact(CHUNKS))?;
        let gateway = self.gateway(false)?;
        let out = generate_all(&chunks, &gateway, &self.cfg.generation)?;
        write_records(&self.artifact(QA_PAIRS), &out.pairs)?;
        write_records(&self.artifact(GENERATION_DIAGNOSTICS), &out.diagnostics)?;
        let flagged = out.pairs.iter().filter(|p| p.needs_review).count();
        let counts = json!({
            "chunks": chunks.len(),
            "pairs": out.pairs.len(),
            "pairs_needing_review": flagged,
            "failed_chunks": out.diagnostics.len(),
        });
        self.write_manifest(Stage::Generate, counts, &[QA_PAIRS, GENERATION_DIAGNOSTICS])?;
        Ok(format!(
            "generate: {} pairs from {} chunks ({} chunks failed, {} pairs flagged for review)",
            out.pairs.len(),
            chunks.len(),
            out.diagnostics.len(),
            flagged
        ))
    }

    fn build(&self) -> Result<String, PipelineError> {
        // Chunks are a declared input so a stale or missing chunk stage is
        // caught here; only pair provenance is needed below.
        let _chunks: Vec<Chunk> = read_records(&self.artifact(CHUNKS))?;
        let pairs: Vec<QAPair> = read_records(&self.artifact(QA_PAIRS))?;
        let needs_gateway = self.cfg.augment.enabled || self.cfg.dedup.mode == DedupMode::Embedding;
        let gateway = if needs_gateway { Some(self.gateway(false)?) } else { None };

        let deduped = match (self.cfg.dedup.mode, &gateway) {
            (DedupMode::Embedding, Some(g)) => dedup_pairs_embedding(&pairs, g, self.cfg.dedup.embedding_threshold)?,
            _ => dedup_pairs(&pairs, self.cfg.dedup.near_dup_threshold)?,
        };
        let augmented = augment_pairs(&deduped, gateway.as_ref(), &self.cfg.augment)?;
        let split = split_dataset(&augmented.pairs, &self.cfg.split)?;

        let system = &self.cfg.training.system_prompt;
        let to_records = |ps: &[QAPair], name| -> Result<Vec<DatasetRecord>, DatasetError> {
            ps.iter().map(|p| serialize_record(p, system, name)).collect()
        };
        let train = to_records(&split.train, SplitName::Train)?;
        let test = to_records(&split.test, SplitName::Test)?;
        write_records(&self.artifact(TRAIN), &train)?;
        write_records(&self.artifact(TEST), &test)?;
        export_training_config(&self.cfg.training.hyperparameters, &self.artifact(TRAINING_CONFIG))?;
        let mut outputs = vec![TRAIN, TEST, TRAINING_CONFIG];
        if self.cfg.augment.enabled {
            write_records(&self.artifact(AUGMENT_DIAGNOSTICS), &augmented.diagnostics)?;
            outputs.push(AUGMENT_DIAGNOSTICS);
        }

        let counts = json!({
            "pairs_in": pairs.len(),
            "after_dedup": deduped.len(),
            "augmentation_enabled": self.cfg.augment.enabled,
            "after_augmentation": augmented.pairs.len(),
            "train": train.len(),
            "test": test.len(),
            "train_cells": cell_counts(&split.train),
            "test_cells": cell_counts(&split.test),
        });
        self.write_manifest(Stage::Build, counts, &outputs)?;
        Ok(format!(
            "build: {} pairs -> {} after dedup -> {} after augmentation; train {}, test {}",
            pairs.len(),
            deduped.len(),
            augmented.pairs.len(),
            train.len(),
            test.len()
        ))
    }

    fn evaluate(&self) -> Result<String, PipelineError> {
        let test: Vec<DatasetRecord> = read_records(&self.artifact(TEST))?;
        let gateway = self.gateway(true)?;
        let ev = evaluate_model(&test, &gateway, &self.cfg.eval)?;
        write_records(&self.artifact(EVAL_SAMPLES), &ev.samples)?;
        let rendered = render_report(&ev.report);
        write_file(&self.artifact(EVAL_REPORT_JSON), &(rendered.json + "\n"))?;
        write_file(&self.artifact(EVAL_REPORT_TEXT), &rendered.text)?;
        let flagged = ev.samples.iter().filter(|s| s.diagnostic.is_some()).count();
        let counts = json!({
            "n": ev.report.overall.n,
            "pass_rate_pct": ev.report.overall.pass_rate_pct,
            "truncation_count": ev.report.overall.truncation_count,
            "samples_with_diagnostics": flagged,
        });
        self.write_manifest(Stage::Evaluate, counts, &[EVAL_SAMPLES, EVAL_REPORT_JSON, EVAL_REPORT_TEXT])?;
        Ok(rendered.text)
    }

    fn report(&self) -> Result<String, PipelineError> {
        let report = read_report(&self.artifact(EVAL_REPORT_JSON))?;
        let rendered = render_report(&report);
        write_file(&self.artifact(EVAL_REPORT_TEXT), &rendered.text)?;
        let mut outputs = vec![EVAL_REPORT_TEXT];
        let mut text = rendered.text;
        if !self.compare.is_empty() {
            let mut reports = vec![report];
            for p in &self.compare {
                reports.push(read_report(p)?);
            }
            let c = compare_models(&reports)?;
            write_file(&self.artifact(COMPARISON_TEXT), &c.text)?;
            outputs.push(COMPARISON_TEXT);
            text.push('\n');
            text.push_str(&c.text);
        }
        self.write_manifest(Stage::Report, json!({ "reports": 1 + self.compare.len() }), &outputs)?;
        Ok(text)
    }
}

pub fn read_report(path: &Path) -> Result<EvalReport, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_report(&text).map_err(|e| PipelineError::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
