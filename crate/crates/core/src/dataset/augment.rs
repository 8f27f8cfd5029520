use serde::{Deserialize, Serialize};

use crate::gateway::{map_concurrent, ChatRequest, Gateway, GatewayError};
use crate::qagen::{pair_id, validate_pair, QAPair};

use super::dedup::{dedup_originals_first, validate_threshold};
use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSettings {
    pub enabled: bool,
    pub model_name: String,
    pub system_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub near_dup_threshold: f64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            model_name: "mistral-7b-instruct".into(),
            system_prompt: "You rephrase questions. Reply with the rephrased question only.".into(),
            temperature: 0.7,
            max_tokens: 128,
            near_dup_threshold: 0.90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentDiagnostic {
    pub source_id: String,
    pub attempts: u32,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentOutput {
    pub pairs: Vec<QAPair>,
    pub diagnostics: Vec<AugmentDiagnostic>,
}

pub fn paraphrase_prompt(question: &str) -> String {
    format!(
        "Rephrase the following question so that it asks for exactly the same information \
         using different wording. Return only the rephrased question.\n\nQuestion: {question}"
    )
}

/// First non-empty line, minus surrounding quotes and a leading label.
fn clean_paraphrase(raw: &str) -> &str {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line
        .strip_prefix("Question:")
        .or_else(|| line.strip_prefix("Rephrased question:"))
        .unwrap_or(line)
        .trim();
    line.trim_matches(|c| c == '"' || c == '\'' || c == '`').trim()
}

type Paraphrase = Result<Result<String, AugmentDiagnostic>, GatewayError>;

fn paraphrase_one(pair: &QAPair, gateway: &Gateway, s: &AugmentSettings) -> Paraphrase {
    let req = ChatRequest {
        system_prompt: s.system_prompt.clone(),
        user_prompt: paraphrase_prompt(&pair.question),
        temperature: s.temperature,
        max_tokens: s.max_tokens,
        model_name: s.model_name.clone(),
    };
    let mut errors = Vec::new();
    for _ in 0..gateway.policy().max_attempts {
        match gateway.chat_complete(&req) {
            Ok(resp) => {
                let q = clean_paraphrase(&resp.text);
                match validate_pair(pair.qa_type, q, &pair.answer) {
                    Ok(()) => return Ok(Ok(q.to_string())),
                    Err(what) => errors.push(format!("paraphrase failed {what} check")),
                }
            }
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => errors.push(e.to_string()),
        }
    }
    Ok(Err(AugmentDiagnostic {
        source_id: pair.id.clone(),
        attempts: errors.len() as u32,
        errors,
    }))
}

/// Add one question paraphrase per pair, answers unchanged.
///
/// Disabled settings return the input untouched and never touch the gateway.
/// Paraphrases go through near-duplicate removal with every original ranked
/// ahead of every paraphrase, so a paraphrase never displaces a source pair.
/// Each surviving paraphrase sits right after its source.
pub fn augment_pairs(
    pairs: &[QAPair],
    gateway: Option<&Gateway>,
    settings: &AugmentSettings,
) -> Result<AugmentOutput, DatasetError> {
    if !settings.enabled {
        return Ok(AugmentOutput {
            pairs: pairs.to_vec(),
            diagnostics: Vec::new(),
        });
    }
    validate_threshold(settings.near_dup_threshold)?;
    let gateway = gateway
        .ok_or_else(|| DatasetError::InvalidConfig("augmentation enabled without a chat endpoint".into()))?;

    let results = map_concurrent(pairs, gateway.policy().max_in_flight, |p| {
        paraphrase_one(p, gateway, settings)
    });

    let mut merged: Vec<QAPair> = Vec::with_capacity(pairs.len() * 2);
    let mut diagnostics = Vec::new();
    for (p, r) in pairs.iter().zip(results) {
        merged.push(p.clone());
        match r? {
            Ok(question) => merged.push(QAPair {
                id: pair_id(&p.doc_id, p.segment_index, &question),
                question,
                derived_from: Some(p.id.clone()),
                ..p.clone()
            }),
            Err(d) => diagnostics.push(d),
        }
    }

    let mut keep = dedup_originals_first(&merged, settings.near_dup_threshold);
    for (k, p) in keep.iter_mut().zip(&merged) {
        if p.derived_from.is_none() {
            *k = true;
        }
    }
    let pairs = merged
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect();
    Ok(AugmentOutput { pairs, diagnostics })
}
