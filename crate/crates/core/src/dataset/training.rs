use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const LORA_RANKS: [u32; 3] = [8, 16, 32];

/// Fine-tuning hyperparameters handed to the external trainer.
///
/// Construction goes through [`TrainingConfigExport::new`] or deserialization,
/// both of which validate; fields are read-only afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrainingConfig")]
pub struct TrainingConfigExport {
    lora_rank: u32,
    learning_rate: f64,
    warmup_steps: u32,
    gradient_accumulation_steps: u32,
    early_stopping_patience: u32,
    eval_interval_steps: u32,
    per_device_batch_size: u32,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTrainingConfig {
    lora_rank: u32,
    learning_rate: f64,
    warmup_steps: u32,
    gradient_accumulation_steps: u32,
    early_stopping_patience: u32,
    eval_interval_steps: u32,
    per_device_batch_size: u32,
}

impl Default for RawTrainingConfig {
    fn default() -> Self {
        Self {
            lora_rank: 16,
            learning_rate: 5e-5,
            warmup_steps: 100,
            gradient_accumulation_steps: 8,
            early_stopping_patience: 3,
            eval_interval_steps: 200,
            per_device_batch_size: 1,
        }
    }
}

impl TryFrom<RawTrainingConfig> for TrainingConfigExport {
    type Error = DatasetError;

    fn try_from(r: RawTrainingConfig) -> Result<Self, Self::Error> {
        if !LORA_RANKS.contains(&r.lora_rank) {
            return Err(DatasetError::InvalidConfig(format!(
                "lora_rank {} is not one of 8, 16, 32",
                r.lora_rank
            )));
        }
        if !(r.learning_rate.is_finite() && r.learning_rate > 0.0) {
            return Err(DatasetError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                r.learning_rate
            )));
        }
        for (name, v) in [
            ("warmup_steps", r.warmup_steps),
            ("gradient_accumulation_steps", r.gradient_accumulation_steps),
            ("early_stopping_patience", r.early_stopping_patience),
            ("eval_interval_steps", r.eval_interval_steps),
            ("per_device_batch_size", r.per_device_batch_size),
        ] {
            if v == 0 {
                return Err(DatasetError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(Self {
            lora_rank: r.lora_rank,
            learning_rate: r.learning_rate,
            warmup_steps: r.warmup_steps,
            gradient_accumulation_steps: r.gradient_accumulation_steps,
            early_stopping_patience: r.early_stopping_patience,
            eval_interval_steps: r.eval_interval_steps,
            per_device_batch_size: r.per_device_batch_size,
        })
    }
}

impl Default for TrainingConfigExport {
    fn default() -> Self {
        RawTrainingConfig::default().try_into().expect("defaults are valid")
    }
}

impl TrainingConfigExport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lora_rank: u32,
        learning_rate: f64,
        warmup_steps: u32,
        gradient_accumulation_steps: u32,
        early_stopping_patience: u32,
        eval_interval_steps: u32,
        per_device_batch_size: u32,
    ) -> Result<Self, DatasetError> {
        RawTrainingConfig {
            lora_rank,
            learning_rate,
            warmup_steps,
            gradient_accumulation_steps,
            early_stopping_patience,
            eval_interval_steps,
            per_device_batch_size,
        }
        .try_into()
    }

    /// Defaults with a different rank.
    pub fn with_rank(lora_rank: u32) -> Result<Self, DatasetError> {
        RawTrainingConfig {
            lora_rank,
            ..Default::default()
        }
        .try_into()
    }

    pub fn lora_rank(&self) -> u32 {
        self.lora_rank
    }
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
    pub fn warmup_steps(&self) -> u32 {
        self.warmup_steps
    }
    pub fn gradient_accumulation_steps(&self) -> u32 {
        self.gradient_accumulation_steps
    }
    pub fn early_stopping_patience(&self) -> u32 {
        self.early_stopping_patience
    }
    pub fn eval_interval_steps(&self) -> u32 {
        self.eval_interval_steps
    }
    pub fn per_device_batch_size(&self) -> u32 {
        self.per_device_batch_size
    }

    /// Flat `key=value` lines. The learning rate is written in exponent form
    /// (`5e-5`), which is also valid TOML.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lora_rank={}", self.lora_rank);
        let _ = writeln!(s, "learning_rate={:e}", self.learning_rate);
        let _ = writeln!(s, "warmup_steps={}", self.warmup_steps);
        let _ = writeln!(s, "gradient_accumulation_steps={}", self.gradient_accumulation_steps);
        let _ = writeln!(s, "early_stopping_patience={}", self.early_stopping_patience);
        let _ = writeln!(s, "eval_interval_steps={}", self.eval_interval_steps);
        let _ = writeln!(s, "per_device_batch_size={}", self.per_device_batch_size);
        s
    }

    pub fn from_key_values(text: &str) -> Result<Self, DatasetError> {
        toml::from_str(text).map_err(|e| DatasetError::InvalidConfig(e.message().to_string()))
    }
}

pub fn export_training_config(cfg: &TrainingConfigExport, path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, cfg.to_key_values()).map_err(|e| DatasetError::WriteFailure {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn read_training_config(path: &Path) -> Result<TrainingConfigExport, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::ReadFailure {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    TrainingConfigExport::from_key_values(&text)
}
