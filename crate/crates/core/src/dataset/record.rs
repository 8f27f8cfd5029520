use serde::{Deserialize, Serialize};

use crate::qagen::{QAPair, QAType};

use super::DatasetError;

pub const SYSTEM_DELIMITER: &str = "<|system|>";
pub const USER_DELIMITER: &str = "<|user|>";
pub const ASSISTANT_DELIMITER: &str = "<|assistant|>";
const DELIMITERS: [&str; 3] = [SYSTEM_DELIMITER, USER_DELIMITER, ASSISTANT_DELIMITER];

/// Shipped default for the training system prompt. The prompt used for any
/// published checkpoint is not known; set `training.system_prompt` to match
/// your trainer.
pub const DEFAULT_TRAINING_SYSTEM_PROMPT: &str =
    "You are an assistant for agricultural pest management. Answer questions about invasive insect pests accurately and concisely.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
}

/// One chat-formatted training sample.
///
/// `response_char_start` counts Unicode scalar values, not bytes: the loss
/// covers the tokens of `text[response_char_start..]`, i.e. everything after
/// the assistant delimiter. The trainer maps that span onto its own tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    pub response_char_start: usize,
    pub question: String,
    pub answer: String,
    pub qa_type: QAType,
    pub species: String,
    pub split: SplitName,
}

impl DatasetRecord {
    /// The loss-bearing suffix of `text`.
    pub fn response(&self) -> &str {
        let byte = self
            .text
            .char_indices()
            .nth(self.response_char_start)
            .map_or(self.text.len(), |(i, _)| i);
        &self.text[byte..]
    }
}

fn check(field: &'static str, value: &str) -> Result<(), DatasetError> {
    for d in DELIMITERS {
        if value.contains(d) {
            return Err(DatasetError::DelimiterCollision {
                field,
                delimiter: d,
            });
        }
    }
    Ok(())
}

/// `<|system|>{system}<|user|>{question}<|assistant|>{answer}` with the
/// response span starting right after the assistant delimiter.
pub fn serialize_record(pair: &QAPair, system_prompt: &str, split: SplitName) -> Result<DatasetRecord, DatasetError> {
    check("system_prompt", system_prompt)?;
    check("question", &pair.question)?;
    check("answer", &pair.answer)?;
    let prefix = format!("{SYSTEM_DELIMITER}{system_prompt}{USER_DELIMITER}{}{ASSISTANT_DELIMITER}", pair.question);
    let response_char_start = prefix.chars().count();
    Ok(DatasetRecord {
        id: pair.id.clone(),
        text: prefix + &pair.answer,
        response_char_start,
        question: pair.question.clone(),
        answer: pair.answer.clone(),
        qa_type: pair.qa_type,
        species: pair.species.clone(),
        split,
    })
}

/// Recover `(system_prompt, question, answer)` from a record's text.
pub fn parse_record_text(text: &str) -> Option<(&str, &str, &str)> {
    let rest = text.strip_prefix(SYSTEM_DELIMITER)?;
    let (system, rest) = rest.split_once(USER_DELIMITER)?;
    let (question, answer) = rest.split_once(ASSISTANT_DELIMITER)?;
    if answer.contains(ASSISTANT_DELIMITER) {
        return None;
    }
    Some((system, question, answer))
}
