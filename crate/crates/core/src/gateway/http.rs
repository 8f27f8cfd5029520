use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, ChatResponse, FinishReason, Transport, TransportError, API_KEY_ENV};

/// OpenAI-compatible `/chat/completions` and `/embeddings` client.
pub struct HttpTransport {
    base: String,
    api_key: Option<String>,
    client: Client,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingBody {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl HttpTransport {
    /// `base` is the API root, e.g. `http://localhost:8000/v1`.
    pub fn new(base: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_string(),
            api_key: api_key.filter(|k| !k.is_empty()),
            client,
        })
    }

    /// Credential from `QA_FORGE_API_KEY`, if set. Local servers usually need none.
    pub fn from_env(base: &str, timeout: Duration) -> Result<Self, TransportError> {
        Self::new(base, std::env::var(API_KEY_ENV).ok(), timeout)
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<String, TransportError> {
        let mut req = self.client.post(format!("{}{}", self.base, path)).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| TransportError::Unreachable(format!("reading body: {e}")))?;
        match status {
            s if s.is_success() => Ok(text),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Err(TransportError::AuthRejected(format!("{status}: {}", snippet(&text))))
            }
            StatusCode::TOO_MANY_REQUESTS | StatusCode::SERVICE_UNAVAILABLE => {
                Err(TransportError::Throttled(format!("{status}")))
            }
            s if s.is_server_error() => Err(TransportError::Unreachable(format!(
                "{status}: {}",
                snippet(&text)
            ))),
            _ => Err(TransportError::Malformed(format!("{status}: {}", snippet(&text)))),
        }
    }
}

fn snippet(s: &str) -> &str {
    let end = s.char_indices().nth(200).map_or(s.len(), |(i, _)| i);
    &s[..end]
}

fn finish_reason(raw: Option<&str>) -> FinishReason {
    match raw {
        None | Some("stop") | Some("eos") | Some("end_turn") => FinishReason::Stop,
        Some("length") | Some("max_tokens") => FinishReason::Length,
        Some(_) => FinishReason::Error,
    }
}

impl Transport for HttpTransport {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let mut messages = Vec::with_capacity(2);
        if !req.system_prompt.is_empty() {
            messages.push(json!({"role": "system", "content": req.system_prompt}));
        }
        messages.push(json!({"role": "user", "content": req.user_prompt}));
        let body = json!({
            "model": req.model_name,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let started = Instant::now();
        let raw = self.post("/chat/completions", body)?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let parsed: CompletionBody = serde_json::from_str(&raw)
            .map_err(|e| TransportError::Malformed(format!("completion body: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError::Malformed("completion has no choices".into()))?;
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason: finish_reason(choice.finish_reason.as_deref()),
            latency_ms,
        })
    }

    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
        let raw = self.post("/embeddings", json!({"model": model, "input": texts}))?;
        let parsed: EmbeddingBody = serde_json::from_str(&raw)
            .map_err(|e| TransportError::Malformed(format!("embedding body: {e}")))?;
        let mut items = parsed.data;
        if items.iter().all(|i| i.index.is_some()) {
            items.sort_by_key(|i| i.index);
        }
        Ok(items.into_iter().map(|i| i.embedding).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finish_reason_mapping() {
        assert_eq!(finish_reason(Some("stop")), FinishReason::Stop);
        assert_eq!(finish_reason(None), FinishReason::Stop);
        assert_eq!(finish_reason(Some("length")), FinishReason::Length);
        assert_eq!(finish_reason(Some("content_filter")), FinishReason::Error);
    }

    #[test]
    fn unreachable_host() {
        // Port 9 on loopback is essentially never bound.
        let t = HttpTransport::new("http://127.0.0.1:9/v1", None, Duration::from_millis(500)).unwrap();
        let req = ChatRequest {
            system_prompt: String::new(),
            user_prompt: "hi".into(),
            temperature: 0.0,
            max_tokens: 4,
            model_name: "m".into(),
        };
        assert!(matches!(t.chat(&req), Err(TransportError::Unreachable(_))));
    }
}
