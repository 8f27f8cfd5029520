//! Chat-completion and embedding client with retry and in-flight limits.
//!
//! [`Gateway`] owns the policy; a [`Transport`] performs single attempts.
//! [`HttpTransport`] speaks the OpenAI-compatible wire format, tests plug in
//! scripted transports.

mod http;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use http::HttpTransport;

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "QA_FORGE_API_KEY";

const MAX_ATTEMPTS_CAP: u32 = 10;
const DEFAULT_EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user_prompt is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    /// The generation limit was hit; the text may be cut off.
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
}

impl ChatResponse {
    pub fn is_truncated(&self) -> bool {
        self.finish_reason == FinishReason::Length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Option<Self> {
        (!values.is_empty()).then_some(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(1..=MAX_ATTEMPTS_CAP).contains(&self.max_attempts) {
            return Err(GatewayError::InvalidRequest(format!(
                "max_attempts must be in 1..={MAX_ATTEMPTS_CAP}, got {}",
                self.max_attempts
            )));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::InvalidRequest("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }

    /// Delay before attempt `attempt + 1`, after `attempt` failures.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(1)).min(16);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("endpoint unreachable after {attempts} attempt(s): {last}")]
    EndpointUnreachable { attempts: u32, last: String },
    #[error("endpoint still throttling after {attempts} attempt(s)")]
    Throttled { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("credential rejected: {0}")]
    AuthRejected(String),
    #[error("embedding {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    /// Errors after which continuing a run makes no sense.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            GatewayError::EndpointUnreachable { .. } | GatewayError::AuthRejected(_)
        )
    }
}

/// Outcome of one transport attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    /// Connection refused, timeouts, 5xx. Retried.
    Unreachable(String),
    /// 429 or similar back-pressure. Retried.
    Throttled(String),
    AuthRejected(String),
    Malformed(String),
}

pub trait Transport: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError>;
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError>;
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Counting semaphore bounding outstanding requests.
struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct Gateway {
    transport: Arc<dyn Transport>,
    policy: RetryPolicy,
    embedding_model: String,
    embed_batch_size: usize,
    in_flight: InFlight,
    sleeper: Arc<dyn Sleeper>,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, policy: RetryPolicy) -> Result<Self, GatewayError> {
        policy.validate()?;
        Ok(Self {
            transport,
            policy,
            embedding_model: String::new(),
            embed_batch_size: DEFAULT_EMBED_BATCH,
            in_flight: InFlight::new(policy.max_in_flight),
            sleeper: Arc::new(ThreadSleeper),
        })
    }

    pub fn with_embedding_model(mut self, model: impl Into<String>) -> Self {
        self.embedding_model = model.into();
        self
    }

    pub fn with_embed_batch_size(mut self, size: usize) -> Self {
        self.embed_batch_size = size.max(1);
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    fn with_retry<T>(
        &self,
        mut attempt_once: impl FnMut() -> Result<T, TransportError>,
    ) -> Result<T, GatewayError> {
        let max = self.policy.max_attempts;
        let mut last = String::new();
        let mut throttled_last = false;
        for attempt in 1..=max {
            let outcome = {
                let _permit = self.in_flight.acquire();
                attempt_once()
            };
            match outcome {
                Ok(v) => return Ok(v),
                Err(TransportError::AuthRejected(m)) => return Err(GatewayError::AuthRejected(m)),
                Err(TransportError::Malformed(m)) => return Err(GatewayError::MalformedResponse(m)),
                Err(TransportError::Unreachable(m)) => {
                    last = m;
                    throttled_last = false;
                }
                Err(TransportError::Throttled(m)) => {
                    last = m;
                    throttled_last = true;
                }
            }
            if attempt < max {
                self.sleeper.sleep(self.policy.backoff(attempt));
            }
        }
        if throttled_last {
            Err(GatewayError::Throttled { attempts: max })
        } else {
            Err(GatewayError::EndpointUnreachable {
                attempts: max,
                last,
            })
        }
    }

    /// First assistant message of a completion. Transport failures and
    /// throttling are retried with exponential backoff; a well-formed
    /// completion is returned as is, truncated or not.
    pub fn chat_complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        self.with_retry(|| {
            let started = Instant::now();
            let mut resp = self.transport.chat(req)?;
            if resp.latency_ms == 0 {
                resp.latency_ms = started.elapsed().as_millis() as u64;
            }
            Ok(resp)
        })
    }

    /// One vector per input text, in input order, all of the same dimension.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidRequest("no texts to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(GatewayError::InvalidRequest(format!("text {i} is empty")));
        }
        let mut out: Vec<EmbeddingVector> = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.embed_batch_size) {
            let raw = self.with_retry(|| self.transport.embed(&self.embedding_model, batch))?;
            if raw.len() != batch.len() {
                return Err(GatewayError::MalformedResponse(format!(
                    "{} embeddings for {} inputs",
                    raw.len(),
                    batch.len()
                )));
            }
            for values in raw {
                let index = out.len();
                let expected = out.first().map_or(values.len(), EmbeddingVector::dim);
                if values.len() != expected || values.is_empty() {
                    return Err(GatewayError::DimensionMismatch {
                        expected,
                        found: values.len(),
                        index,
                    });
                }
                out.push(EmbeddingVector { values });
            }
        }
        Ok(out)
    }
}

/// Apply `f` to every item on up to `workers` threads; results keep input order.
pub fn map_concurrent<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    use std::sync::atomic::{AtomicUsize, Ordering};

    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..items.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Scripted transport: pops one outcome per chat call.
    struct Script {
        chat: Mutex<Vec<Result<ChatResponse, TransportError>>>,
        embed: Mutex<Vec<Result<Vec<Vec<f64>>, TransportError>>>,
        calls: AtomicUsize,
    }

    impl Script {
        fn chat(mut outcomes: Vec<Result<ChatResponse, TransportError>>) -> Self {
            outcomes.reverse();
            Self {
                chat: Mutex::new(outcomes),
                embed: Mutex::new(Vec::new()),
                calls: AtomicUsize::new(0),
            }
        }

        fn embed(mut outcomes: Vec<Result<Vec<Vec<f64>>, TransportError>>) -> Self {
            outcomes.reverse();
            Self {
                chat: Mutex::new(Vec::new()),
                embed: Mutex::new(outcomes),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for Script {
        fn chat(&self, _req: &ChatRequest) -> Result<ChatResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.chat.lock().unwrap().pop().expect("script exhausted")
        }

        fn embed(&self, _model: &str, _texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.embed.lock().unwrap().pop().expect("script exhausted")
        }
    }

    #[derive(Default)]
    struct RecordingSleeper(Mutex<Vec<Duration>>);

    impl Sleeper for RecordingSleeper {
        fn sleep(&self, d: Duration) {
            self.0.lock().unwrap().push(d);
        }
    }

    fn ok(text: &str) -> Result<ChatResponse, TransportError> {
        Ok(ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            latency_ms: 1,
        })
    }

    fn down() -> Result<ChatResponse, TransportError> {
        Err(TransportError::Unreachable("connection refused".into()))
    }

    fn req() -> ChatRequest {
        ChatRequest {
            system_prompt: "s".into(),
            user_prompt: "u".into(),
            temperature: 0.2,
            max_tokens: 16,
            model_name: "m".into(),
        }
    }

    fn gateway(t: Arc<Script>, sleeper: Arc<RecordingSleeper>) -> Gateway {
        Gateway::new(t, RetryPolicy::default()).unwrap().with_sleeper(sleeper)
    }

    #[test]
    fn passthrough() {
        let t = Arc::new(Script::chat(vec![ok("OK")]));
        let g = gateway(t.clone(), Default::default());
        let r = g.chat_complete(&req()).unwrap();
        assert_eq!(r.text, "OK");
        assert_eq!(r.finish_reason, FinishReason::Stop);
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn retries_then_succeeds_on_third_attempt() {
        let t = Arc::new(Script::chat(vec![down(), down(), ok("late")]));
        let sleeper = Arc::new(RecordingSleeper::default());
        let g = gateway(t.clone(), sleeper.clone());
        assert_eq!(g.chat_complete(&req()).unwrap().text, "late");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
        assert_eq!(
            *sleeper.0.lock().unwrap(),
            vec![Duration::from_millis(500), Duration::from_millis(1000)]
        );
    }

    #[test]
    fn exhaustion_is_unreachable_and_bounded() {
        let t = Arc::new(Script::chat(vec![down(), down(), down()]));
        let sleeper = Arc::new(RecordingSleeper::default());
        let g = gateway(t.clone(), sleeper.clone());
        let err = g.chat_complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::EndpointUnreachable { attempts: 3, .. }));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
        // No sleep after the final attempt.
        assert_eq!(sleeper.0.lock().unwrap().len(), 2);
    }

    #[test]
    fn persistent_throttling() {
        let th = || Err(TransportError::Throttled("429".into()));
        let t = Arc::new(Script::chat(vec![th(), th(), th()]));
        let err = gateway(t, Default::default()).chat_complete(&req()).unwrap_err();
        assert_eq!(err, GatewayError::Throttled { attempts: 3 });
    }

    #[test]
    fn auth_and_malformed_are_not_retried() {
        let t = Arc::new(Script::chat(vec![Err(TransportError::AuthRejected("401".into()))]));
        let err = gateway(t.clone(), Default::default()).chat_complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::AuthRejected(_)));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);

        let t = Arc::new(Script::chat(vec![Err(TransportError::Malformed("no choices".into()))]));
        let err = gateway(t.clone(), Default::default()).chat_complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::MalformedResponse(_)));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn truncated_completion_is_returned_not_retried() {
        let t = Arc::new(Script::chat(vec![Ok(ChatResponse {
            text: "cut".into(),
            finish_reason: FinishReason::Length,
            latency_ms: 3,
        })]));
        let r = gateway(t.clone(), Default::default()).chat_complete(&req()).unwrap();
        assert!(r.is_truncated());
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn request_validation() {
        let t = Arc::new(Script::chat(vec![]));
        let g = gateway(t, Default::default());
        let mut r = req();
        r.user_prompt = "  ".into();
        assert!(matches!(g.chat_complete(&r), Err(GatewayError::InvalidRequest(_))));
        let mut r = req();
        r.temperature = 2.5;
        assert!(matches!(g.chat_complete(&r), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn policy_bounds() {
        let mut p = RetryPolicy {
            max_attempts: 11,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        p.max_attempts = 0;
        assert!(p.validate().is_err());
        p.max_attempts = 10;
        p.max_in_flight = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn embed_single_and_ordered() {
        let t = Arc::new(Script::embed(vec![Ok(vec![vec![1.0, 2.0, 3.0, 4.0]])]));
        let v = gateway(t, Default::default()).embed_batch(&["a".into()]).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].dim(), 4);

        let t = Arc::new(Script::embed(vec![Ok(vec![vec![1.0, 0.0], vec![0.0, 1.0]])]));
        let v = gateway(t, Default::default())
            .embed_batch(&["a".into(), "b".into()])
            .unwrap();
        assert_eq!(v[0].values(), &[1.0, 0.0]);
        assert_eq!(v[1].values(), &[0.0, 1.0]);
    }

    #[test]
    fn ragged_embeddings_rejected() {
        let t = Arc::new(Script::embed(vec![Ok(vec![vec![1.0, 0.0], vec![0.0, 1.0, 2.0]])]));
        let err = gateway(t, Default::default())
            .embed_batch(&["a".into(), "b".into()])
            .unwrap_err();
        assert_eq!(
            err,
            GatewayError::DimensionMismatch {
                expected: 2,
                found: 3,
                index: 1
            }
        );
    }

    #[test]
    fn ragged_across_batches_rejected() {
        let t = Arc::new(Script::embed(vec![Ok(vec![vec![1.0, 0.0]]), Ok(vec![vec![1.0]])]));
        let g = gateway(t, Default::default()).with_embed_batch_size(1);
        let err = g.embed_batch(&["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, GatewayError::DimensionMismatch { index: 1, .. }));
    }

    #[test]
    fn embed_preconditions() {
        let t = Arc::new(Script::embed(vec![]));
        let g = gateway(t, Default::default());
        assert!(g.embed_batch(&[]).is_err());
        assert!(g.embed_batch(&["a".into(), "".into()]).is_err());
    }

    #[test]
    fn map_concurrent_preserves_order() {
        let items: Vec<usize> = (0..50).collect();
        let out = map_concurrent(&items, 7, |i| i * 2);
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
        assert!(map_concurrent(&Vec::<u8>::new(), 4, |b| *b).is_empty());
    }

    /// Tracks the peak number of simultaneous calls.
    struct Counting {
        current: AtomicUsize,
        peak: AtomicUsize,
    }

    impl Transport for Counting {
        fn chat(&self, _req: &ChatRequest) -> Result<ChatResponse, TransportError> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.current.fetch_sub(1, Ordering::SeqCst);
            ok("x")
        }

        fn embed(&self, _m: &str, t: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
            Ok(t.iter().map(|_| vec![1.0]).collect())
        }
    }

    #[test]
    fn in_flight_bound_holds_under_oversubscription() {
        let t = Arc::new(Counting {
            current: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let policy = RetryPolicy {
            max_in_flight: 3,
            ..Default::default()
        };
        let g = Gateway::new(t.clone(), policy).unwrap();
        let items: Vec<u32> = (0..40).collect();
        // Twelve worker threads compete for three permits.
        let results = map_concurrent(&items, 12, |_| g.chat_complete(&req()).is_ok());
        assert!(results.into_iter().all(|ok| ok));
        let peak = t.peak.load(Ordering::SeqCst);
        assert!(peak <= 3, "peak {peak}");
        assert!(peak >= 2, "expected real concurrency, peak {peak}");
    }
}
