//! Pipeline configuration file.
//!
//! The file is TOML: a handful of top-level keys plus one section per stage.
//! `seed` is required. Relative paths resolve against the directory holding
//! the config file.
//!
//! ```toml
//! seed = 42
//! corpus_manifest = "corpus.tsv"
//! output_dir = "out"
//! endpoint_base = "http://127.0.0.1:8000/v1"
//! generator_model = "mistral-7b-instruct"
//! embedding_model = "all-minilm"
//!
//! [chunk]
//! window_chars = 4000
//!
//! [eval]
//! model_name = "pest-mistral-lora"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::ChunkConfig;
use crate::dataset::{AugmentSettings, SplitConfig, StratifyKey, TrainingConfigExport, DEFAULT_TRAINING_SYSTEM_PROMPT};
use crate::eval::EvalConfig;
use crate::gateway::RetryPolicy;
use crate::metrics::{CosineNormalization, JudgeThresholds};
use crate::qagen::GenerationSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupMode {
    #[default]
    TokenF1,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSettings {
    pub mode: DedupMode,
    pub near_dup_threshold: f64,
    pub embedding_threshold: f64,
}

impl Default for DedupSettings {
    fn default() -> Self {
        Self {
            mode: DedupMode::TokenF1,
            near_dup_threshold: 0.90,
            embedding_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSettings {
    /// Non-canonical unless overridden; see the README.
    pub system_prompt: String,
    pub hyperparameters: TrainingConfigExport,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub corpus_manifest: PathBuf,
    pub output_dir: PathBuf,
    pub endpoint_base: String,
    /// Endpoint serving the model under test; defaults to `endpoint_base`.
    pub eval_endpoint_base: String,
    pub embedding_model: String,
    pub request_timeout_secs: u64,
    pub chunk: ChunkConfig,
    pub generation: GenerationSettings,
    pub retry: RetryPolicy,
    pub split: SplitConfig,
    pub dedup: DedupSettings,
    pub augment: AugmentSettings,
    pub training: TrainingSettings,
    pub eval: EvalConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    corpus_manifest: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    endpoint_base: Option<String>,
    generator_model: Option<String>,
    embedding_model: Option<String>,
    request_timeout_secs: Option<u64>,
    #[serde(default)]
    chunk: ChunkConfig,
    #[serde(default)]
    generation: RawGeneration,
    #[serde(default)]
    retry: RetryPolicy,
    #[serde(default)]
    split: RawSplit,
    #[serde(default)]
    dedup: DedupSettings,
    #[serde(default)]
    augment: RawAugment,
    #[serde(default)]
    training: RawTraining,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    thresholds: JudgeThresholds,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGeneration {
    system_prompt: Option<String>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSplit {
    test_fraction: Option<f64>,
    stratify_by: Option<Vec<StratifyKey>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawAugment {
    enabled: Option<bool>,
    system_prompt: Option<String>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
    near_dup_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTraining {
    system_prompt: Option<String>,
    lora_rank: Option<u32>,
    learning_rate: Option<f64>,
    warmup_steps: Option<u32>,
    gradient_accumulation_steps: Option<u32>,
    early_stopping_patience: Option<u32>,
    eval_interval_steps: Option<u32>,
    per_device_batch_size: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEval {
    model_name: Option<String>,
    system_prompt: Option<String>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
    cosine_normalization: Option<CosineNormalization>,
    endpoint_base: Option<String>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Invalid(format!("missing required key `{key}`")))
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Parse config text, resolving relative paths against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let seed = required(raw.seed, "seed")?;

        let mut generation = GenerationSettings::default();
        if let Some(m) = raw.generator_model.clone() {
            generation.model_name = m;
        }
        let g = raw.generation;
        generation.system_prompt = g.system_prompt.unwrap_or(generation.system_prompt);
        generation.temperature = g.temperature.unwrap_or(generation.temperature);
        generation.max_tokens = g.max_tokens.unwrap_or(generation.max_tokens);

        let mut split = SplitConfig::new(seed);
        split.test_fraction = raw.split.test_fraction.unwrap_or(split.test_fraction);
        if let Some(s) = raw.split.stratify_by {
            split.stratify_by = s;
        }

        let defaults = AugmentSettings::default();
        let a = raw.augment;
        let augment = AugmentSettings {
            enabled: a.enabled.unwrap_or(defaults.enabled),
            // Paraphrases come from the generator model.
            model_name: generation.model_name.clone(),
            system_prompt: a.system_prompt.unwrap_or(defaults.system_prompt),
            temperature: a.temperature.unwrap_or(defaults.temperature),
            max_tokens: a.max_tokens.unwrap_or(defaults.max_tokens),
            near_dup_threshold: a.near_dup_threshold.unwrap_or(defaults.near_dup_threshold),
        };

        let t = raw.training;
        let d = TrainingConfigExport::default();
        let hyperparameters = TrainingConfigExport::new(
            t.lora_rank.unwrap_or(d.lora_rank()),
            t.learning_rate.unwrap_or(d.learning_rate()),
            t.warmup_steps.unwrap_or(d.warmup_steps()),
            t.gradient_accumulation_steps.unwrap_or(d.gradient_accumulation_steps()),
            t.early_stopping_patience.unwrap_or(d.early_stopping_patience()),
            t.eval_interval_steps.unwrap_or(d.eval_interval_steps()),
            t.per_device_batch_size.unwrap_or(d.per_device_batch_size()),
        )
        .map_err(|e| ConfigError::Invalid(format!("[training] {e}")))?;
        let training = TrainingSettings {
            system_prompt: t.system_prompt.unwrap_or_else(|| DEFAULT_TRAINING_SYSTEM_PROMPT.to_string()),
            hyperparameters,
        };

        let endpoint_base = required(raw.endpoint_base, "endpoint_base")?;
        let e = raw.eval;
        let ed = EvalConfig::default();
        let eval = EvalConfig {
            model_name: e.model_name.unwrap_or(ed.model_name),
            // The model under test should see the prompt it was trained with.
            system_prompt: e.system_prompt.unwrap_or_else(|| training.system_prompt.clone()),
            temperature: e.temperature.unwrap_or(ed.temperature),
            max_tokens: e.max_tokens.unwrap_or(ed.max_tokens),
            thresholds: raw.thresholds,
            cosine_normalization: e.cosine_normalization.unwrap_or(ed.cosine_normalization),
        };

        let cfg = Self {
            seed,
            corpus_manifest: resolve(base_dir, required(raw.corpus_manifest, "corpus_manifest")?),
            output_dir: resolve(base_dir, required(raw.output_dir, "output_dir")?),
            eval_endpoint_base: e.endpoint_base.unwrap_or_else(|| endpoint_base.clone()),
            endpoint_base,
            embedding_model: raw.embedding_model.unwrap_or_else(|| "text-embedding".into()),
            request_timeout_secs: raw.request_timeout_secs.unwrap_or(120),
            chunk: raw.chunk,
            generation,
            retry: raw.retry,
            split,
            dedup: raw.dedup,
            augment,
            training,
            eval,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |section: &str, e: String| ConfigError::Invalid(format!("[{section}] {e}"));
        self.chunk.validate().map_err(|e| inv("chunk", e.to_string()))?;
        self.retry.validate().map_err(|e| inv("retry", e.to_string()))?;
        self.split.validate().map_err(|e| inv("split", e.to_string()))?;
        self.eval.validate().map_err(|e| inv("eval", e.to_string()))?;
        let g = &self.generation;
        if g.max_tokens == 0 || !(0.0..=2.0).contains(&g.temperature) {
            return Err(inv("generation", "max_tokens must be > 0 and temperature in [0, 2]".into()));
        }
        for (name, t) in [
            ("near_dup_threshold", self.dedup.near_dup_threshold),
            ("embedding_threshold", self.dedup.embedding_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(inv("dedup", format!("{name} {t} is outside (0, 1]")));
            }
        }
        if self.request_timeout_secs == 0 {
            return Err(ConfigError::Invalid("request_timeout_secs must be > 0".into()));
        }
        if self.endpoint_base.trim().is_empty() {
            return Err(ConfigError::Invalid("endpoint_base is empty".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.split.seed = seed;
        self
    }
}
