//! Q/A pair generation: prompt construction, strict output parsing and the
//! regenerate-on-failure loop.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chunker::Chunk;
use crate::gateway::{map_concurrent, ChatRequest, Gateway, GatewayError};
use crate::hashing::short_id;
use crate::metrics::tokenize_for_metrics;

/// The generation prompt. `{chunk}` in the first line is replaced by the chunk
/// text; the later mention in constraint (b) refers back to it and is kept.
pub const PROMPT_TEMPLATE: &str = r#"Read the following {chunk} and:
(1) Generate 2 factual question-answer pairs.
(2) Generate 2 definition-based question-answer pairs.
(3) Create 2 reasoning (why/how) question-answer pairs.
(4) Provide 2 comparison question-answer pairs.
(5) Write 2 list-based or multi-point answer question-answer pairs.
(6) Provide 2 procedural (how-to) question-answer pairs.

Return the output strictly in the following JSON format:
{"qa_pairs": [{
      "type": "factual | definition | reasoning | comparison | list | procedural",
      "question": "string",
      "answer": "string" }]
Constraints: a) Generate exactly 12 QA pairs (2 per category), b) Ensure answers are grounded only in the provided {chunk}, c) Do not include explanations outside the JSON, d) Avoid duplicate or semantically overlapping questions."#;

pub const PLACEHOLDER: &str = "{chunk}";
pub const PAIRS_PER_CHUNK: usize = 12;
pub const PAIRS_PER_TYPE: usize = 2;

/// Answers sharing less than this fraction of tokens with their chunk are
/// flagged for human review.
pub const GROUNDEDNESS_FLOOR: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QAType {
    Factual,
    Definition,
    Reasoning,
    Comparison,
    List,
    Procedural,
}

impl QAType {
    pub const ALL: [QAType; 6] = [
        QAType::Factual,
        QAType::Definition,
        QAType::Reasoning,
        QAType::Comparison,
        QAType::List,
        QAType::Procedural,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QAType::Factual => "factual",
            QAType::Definition => "definition",
            QAType::Reasoning => "reasoning",
            QAType::Comparison => "comparison",
            QAType::List => "list",
            QAType::Procedural => "procedural",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        Self::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for QAType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub qa_type: QAType,
    pub question: String,
    pub answer: String,
    pub doc_id: String,
    pub segment_index: usize,
    pub species: String,
    /// Id of the pair this one paraphrases, for augmented pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<String>,
    /// Answer looks weakly grounded in its chunk.
    #[serde(default)]
    pub needs_review: bool,
}

pub fn pair_id(doc_id: &str, segment_index: usize, question: &str) -> String {
    short_id([doc_id, &segment_index.to_string(), question])
}

/// Check the pair-level invariants.
pub fn validate_pair(qa_type: QAType, question: &str, answer: &str) -> Result<(), &'static str> {
    if question.trim().is_empty() {
        return Err("question");
    }
    if answer.trim().is_empty() {
        return Err("answer");
    }
    if qa_type != QAType::Procedural && !question.trim_end().ends_with('?') {
        return Err("question mark");
    }
    Ok(())
}

/// Fraction of answer tokens that also occur in `source`.
pub fn grounding_overlap(answer: &str, source: &str) -> f64 {
    let answer_tokens = tokenize_for_metrics(answer);
    if answer_tokens.is_empty() {
        return 0.0;
    }
    let source_tokens: HashSet<String> = tokenize_for_metrics(source).into_iter().collect();
    let hits = answer_tokens.iter().filter(|t| source_tokens.contains(*t)).count();
    hits as f64 / answer_tokens.len() as f64
}

pub fn build_prompt(chunk: &Chunk) -> String {
    PROMPT_TEMPLATE.replacen(PLACEHOLDER, &chunk.text, 1)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QaParseError {
    #[error("response is not valid JSON: {0}")]
    JsonInvalid(String),
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("expected {PAIRS_PER_CHUNK} pairs, found {0}")]
    CountMismatch(usize),
    #[error("expected {PAIRS_PER_TYPE} {0} pairs, found {1}")]
    CategoryImbalance(QAType, usize),
    #[error("unknown question type {0:?}")]
    UnknownType(String),
    #[error("pair {0} has an empty {1}")]
    EmptyField(usize, String),
    #[error("pair {0} is not phrased as a question")]
    NotAQuestion(usize),
}

/// Remove a surrounding markdown code fence, if any.
pub fn strip_code_fence(raw: &str) -> &str {
    let s = raw.trim();
    let Some(rest) = s.strip_prefix("```") else {
        return s;
    };
    // Drop the info string (```json) up to the first newline.
    let body = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn string_field<'a>(entry: &'a serde_json::Map<String, Value>, index: usize, key: &str) -> Result<&'a str, QaParseError> {
    match entry.get(key) {
        None | Some(Value::Null) => Err(QaParseError::MissingKey(format!("qa_pairs[{index}].{key}"))),
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(QaParseError::JsonInvalid(format!(
            "qa_pairs[{index}].{key} is {other}, expected a string"
        ))),
    }
}

/// Parse and validate a generation response for `chunk`.
///
/// The payload must be `{"qa_pairs": [...]}` with exactly twelve entries, two
/// of each type, every entry carrying a known type and non-empty question and
/// answer.
pub fn parse_qa_response(raw: &str, chunk: &Chunk) -> Result<Vec<QAPair>, QaParseError> {
    let body = strip_code_fence(raw);
    let value: Value = serde_json::from_str(body).map_err(|e| QaParseError::JsonInvalid(e.to_string()))?;
    let entries = match value.get("qa_pairs") {
        None => return Err(QaParseError::MissingKey("qa_pairs".into())),
        Some(Value::Array(a)) => a,
        Some(_) => return Err(QaParseError::JsonInvalid("qa_pairs is not an array".into())),
    };
    if entries.len() != PAIRS_PER_CHUNK {
        return Err(QaParseError::CountMismatch(entries.len()));
    }

    let mut pairs = Vec::with_capacity(PAIRS_PER_CHUNK);
    for (i, entry) in entries.iter().enumerate() {
        let obj = entry
            .as_object()
            .ok_or_else(|| QaParseError::JsonInvalid(format!("qa_pairs[{i}] is not an object")))?;
        let qa_type = match obj.get("type") {
            None | Some(Value::Null) => return Err(QaParseError::MissingKey(format!("qa_pairs[{i}].type"))),
            Some(Value::String(s)) => QAType::parse(s).ok_or_else(|| QaParseError::UnknownType(s.clone()))?,
            Some(other) => return Err(QaParseError::UnknownType(other.to_string())),
        };
        let question = string_field(obj, i, "question")?.trim();
        let answer = string_field(obj, i, "answer")?.trim();
        match validate_pair(qa_type, question, answer) {
            Ok(()) => {}
            Err("question mark") => return Err(QaParseError::NotAQuestion(i)),
            Err(field) => return Err(QaParseError::EmptyField(i, field.to_string())),
        }
        pairs.push(QAPair {
            id: pair_id(&chunk.doc_id, chunk.segment_index, question),
            qa_type,
            question: question.to_string(),
            answer: answer.to_string(),
            doc_id: chunk.doc_id.clone(),
            segment_index: chunk.segment_index,
            species: chunk.species.clone(),
            derived_from: None,
            needs_review: grounding_overlap(answer, &chunk.text) < GROUNDEDNESS_FLOOR,
        });
    }

    for t in QAType::ALL {
        let found = pairs.iter().filter(|p| p.qa_type == t).count();
        if found != PAIRS_PER_TYPE {
            return Err(QaParseError::CategoryImbalance(t, found));
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    pub model_name: String,
    pub system_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            model_name: "mistral-7b-instruct".into(),
            system_prompt: "You write question-answer pairs for a training dataset. Reply with JSON only.".into(),
            temperature: 0.2,
            max_tokens: 1024,
        }
    }
}

/// Record of a chunk for which no valid pair set could be produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationDiagnostic {
    pub doc_id: String,
    pub segment_index: usize,
    pub attempts: u32,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkGeneration {
    pub pairs: Vec<QAPair>,
    pub attempts: u32,
    pub diagnostic: Option<GenerationDiagnostic>,
}

/// Generate the pair set for one chunk, regenerating on invalid output.
///
/// Up to the gateway's `max_attempts` completions are requested. Exhaustion
/// yields no pairs plus a diagnostic; only an unreachable endpoint or a
/// rejected credential is returned as an error.
pub fn generate_for_chunk(
    chunk: &Chunk,
    gateway: &Gateway,
    settings: &GenerationSettings,
) -> Result<ChunkGeneration, GatewayError> {
    let max_attempts = gateway.policy().max_attempts;
    let mut errors = Vec::new();
    if chunk.text.trim().is_empty() {
        errors.push("chunk text is empty".to_string());
    } else {
        let req = ChatRequest {
            system_prompt: settings.system_prompt.clone(),
            user_prompt: build_prompt(chunk),
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
            model_name: settings.model_name.clone(),
        };
        for attempt in 1..=max_attempts {
            let outcome = gateway
                .chat_complete(&req)
                .map_err(|e| if e.is_fatal() { Err(e) } else { Ok(e.to_string()) })
                .and_then(|resp| {
                    let truncated = resp.is_truncated();
                    parse_qa_response(&resp.text, chunk).map_err(|e| {
                        Ok(if truncated {
                            format!("{e} (response truncated)")
                        } else {
                            e.to_string()
                        })
                    })
                });
            match outcome {
                Ok(pairs) => {
                    return Ok(ChunkGeneration {
                        pairs,
                        attempts: attempt,
                        diagnostic: None,
                    })
                }
                Err(Err(fatal)) => return Err(fatal),
                Err(Ok(msg)) => errors.push(msg),
            }
        }
    }
    let attempts = errors.len() as u32;
    Ok(ChunkGeneration {
        pairs: Vec::new(),
        attempts,
        diagnostic: Some(GenerationDiagnostic {
            doc_id: chunk.doc_id.clone(),
            segment_index: chunk.segment_index,
            attempts,
            errors,
        }),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationOutput {
    pub pairs: Vec<QAPair>,
    pub diagnostics: Vec<GenerationDiagnostic>,
}

/// Generate for every chunk concurrently (bounded by the gateway); output is
/// ordered by `(doc_id, segment_index)`.
pub fn generate_all(
    chunks: &[Chunk],
    gateway: &Gateway,
    settings: &GenerationSettings,
) -> Result<GenerationOutput, GatewayError> {
    let workers = gateway.policy().max_in_flight;
    let mut results: Vec<(&Chunk, ChunkGeneration)> = Vec::with_capacity(chunks.len());
    for (chunk, r) in chunks
        .iter()
        .zip(map_concurrent(chunks, workers, |c| generate_for_chunk(c, gateway, settings)))
    {
        results.push((chunk, r?));
    }
    results.sort_by(|(a, _), (b, _)| (&a.doc_id, a.segment_index).cmp(&(&b.doc_id, b.segment_index)));
    let mut out = GenerationOutput::default();
    for (_, gen) in results {
        out.pairs.extend(gen.pairs);
        out.diagnostics.extend(gen.diagnostic);
    }
    Ok(out)
}
