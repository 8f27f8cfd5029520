//! Scripted OpenAI-compatible endpoint for integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use qa_forge::dataset::paraphrase_prompt;
use qa_forge::qagen::{QAType, PLACEHOLDER, PROMPT_TEMPLATE};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tiny_http::{Header, Response, Server};

/// How the mock answers evaluation questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelReply {
    /// The reference answer it generated earlier, verbatim.
    Echo,
    Empty,
}

pub struct MockEndpoint {
    pub base: String,
    pub chat_calls: Arc<AtomicUsize>,
    pub embed_calls: Arc<AtomicUsize>,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

struct State {
    reply: ModelReply,
    /// Force every request to fail with this status.
    status: Option<u16>,
    answers: Mutex<HashMap<String, String>>,
}

fn hex(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash-derived vector; equal texts give equal vectors.
pub fn mock_embedding(text: &str) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.finalize().iter().take(16).map(|b| *b as f64 - 127.5).collect()
}

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        cur.push(c);
        if matches!(c, '.' | '!' | '?') {
            let s = cur.trim().to_string();
            if s.split_whitespace().count() >= 3 {
                out.push(s);
            }
            cur.clear();
        }
    }
    if out.is_empty() {
        out.push(text.trim().to_string());
    }
    out
}

/// Twelve pairs, two per category, with questions built from hash-derived
/// tokens so that no two questions in a corpus are near duplicates.
pub fn scripted_pairs(chunk: &str) -> Vec<(QAType, String, String)> {
    let sents = sentences(chunk);
    (0..12)
        .map(|k| {
            let qa_type = QAType::ALL[k / 2];
            let h = hex(&[chunk, &k.to_string()]);
            let words: Vec<String> = (0..5).map(|i| format!("t{}", &h[i * 6..i * 6 + 6])).collect();
            let question = match qa_type {
                QAType::Procedural => format!("Describe how to handle {}.", words.join(" ")),
                _ => format!("What about {}?", words.join(" ")),
            };
            (qa_type, question, sents[k % sents.len()].clone())
        })
        .collect()
}

fn chat_body(content: &str) -> String {
    json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

fn handle_chat(state: &State, body: &Value) -> String {
    let messages = body["messages"].as_array().cloned().unwrap_or_default();
    let user = messages
        .iter()
        .rev()
        .find(|m| m["role"] == "user")
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
        .to_string();
    let (prefix, suffix) = PROMPT_TEMPLATE.split_once(PLACEHOLDER).unwrap();
    if let Some(chunk) = user.strip_prefix(prefix).and_then(|r| r.strip_suffix(suffix)) {
        let pairs = scripted_pairs(chunk);
        let mut answers = state.answers.lock().unwrap();
        let entries: Vec<Value> = pairs
            .into_iter()
            .map(|(t, q, a)| {
                answers.insert(q.clone(), a.clone());
                json!({"type": t.as_str(), "question": q, "answer": a})
            })
            .collect();
        let payload = serde_json::to_string_pretty(&json!({ "qa_pairs": entries })).unwrap();
        return chat_body(&format!("```json\n{payload}\n```"));
    }
    let para_prefix = paraphrase_prompt("");
    if let Some(q) = user.strip_prefix(&para_prefix) {
        return chat_body(&format!("In other words, {}", q.trim()));
    }
    let reply = match state.reply {
        ModelReply::Echo => state.answers.lock().unwrap().get(&user).cloned().unwrap_or_default(),
        ModelReply::Empty => String::new(),
    };
    chat_body(&reply)
}

fn handle_embed(body: &Value) -> String {
    let inputs: Vec<String> = match &body["input"] {
        Value::Array(a) => a.iter().map(|v| v.as_str().unwrap_or("").to_string()).collect(),
        Value::String(s) => vec![s.clone()],
        _ => Vec::new(),
    };
    let data: Vec<Value> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"object": "embedding", "index": i, "embedding": mock_embedding(t)}))
        .collect();
    json!({"object": "list", "data": data}).to_string()
}

impl MockEndpoint {
    pub fn start(reply: ModelReply) -> Self {
        Self::spawn(reply, None)
    }

    /// Every request answered with `status` and an error body.
    pub fn failing(status: u16) -> Self {
        Self::spawn(ModelReply::Empty, Some(status))
    }

    fn spawn(reply: ModelReply, status: Option<u16>) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock endpoint"));
        let port = server.server_addr().to_ip().unwrap().port();
        let state = Arc::new(State {
            reply,
            status,
            answers: Mutex::new(HashMap::new()),
        });
        let stop = Arc::new(AtomicBool::new(false));
        let chat_calls = Arc::new(AtomicUsize::new(0));
        let embed_calls = Arc::new(AtomicUsize::new(0));
        let handle = {
            let (server, stop, chat_calls, embed_calls) =
                (server.clone(), stop.clone(), chat_calls.clone(), embed_calls.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let Ok(Some(mut req)) = server.recv_timeout(Duration::from_millis(50)) else {
                        continue;
                    };
                    let mut raw = String::new();
                    let _ = req.as_reader().read_to_string(&mut raw);
                    let body: Value = serde_json::from_str(&raw).unwrap_or(Value::Null);
                    let json_header = Header::from_bytes("Content-Type", "application/json").unwrap();
                    let url = req.url().to_string();
                    let (code, text) = if let Some(s) = state.status {
                        (s, json!({"error": {"message": "mock failure"}}).to_string())
                    } else if url.ends_with("/chat/completions") {
                        chat_calls.fetch_add(1, Ordering::SeqCst);
                        (200, handle_chat(&state, &body))
                    } else if url.ends_with("/embeddings") {
                        embed_calls.fetch_add(1, Ordering::SeqCst);
                        (200, handle_embed(&body))
                    } else {
                        (404, "{}".to_string())
                    };
                    let _ = req.respond(Response::from_string(text).with_status_code(code).with_header(json_header));
                }
            })
        };
        Self {
            base: format!("http://127.0.0.1:{port}/v1"),
            chat_calls,
            embed_calls,
            server,
            stop,
            handle: Some(handle),
        }
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// A base URL nothing listens on.
pub fn dead_endpoint() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    drop(l);
    format!("http://127.0.0.1:{port}/v1")
}

/// Config for the three-document fixture corpus; windows are sized so each
/// document yields five chunks.
pub fn write_config(dir: &Path, endpoint: &str, seed: u64, extra: &str) -> PathBuf {
    let manifest = fixture_dir().join("corpus/corpus.tsv");
    let text = format!(
        r#"seed = {seed}
corpus_manifest = "{manifest}"
output_dir = "out"
endpoint_base = "{endpoint}"
generator_model = "mock-generator"
embedding_model = "mock-embedder"
request_timeout_secs = 10

[chunk]
window_chars = 400
overlap_chars = 80
backscan_chars = 100

[retry]
max_attempts = 2
backoff_base_ms = 1
max_in_flight = 4

[eval]
model_name = "mock-model"
{extra}"#,
        manifest = manifest.display()
    );
    let path = dir.join("qa-forge.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn qa_forge() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_qa-forge"))
}
