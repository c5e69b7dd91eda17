//! Chat-completion access with retries, structured answers and auditing.
//!
//! A [`Gateway`] wraps any [`ChatBackend`]: the OpenAI-compatible HTTP
//! client in [`openai`], the deterministic [`scripted`] backend, or the
//! [`faults`] injector used to exercise failure handling.

pub mod faults;
pub mod openai;
pub mod scripted;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instrument::{SchemaDescriptor, SchemaViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// Pipeline step a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Reflect,
    Respond,
    Questionnaire,
}

/// Where in a simulation a request was issued. Not sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct RequestContext {
    pub conversation_id: String,
    /// Persona id of the calling agent.
    pub agent_id: String,
    pub round: u32,
    pub purpose: Option<Purpose>,
    pub sample: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub schema: Option<SchemaDescriptor>,
    pub max_tokens: Option<u32>,
    pub context: RequestContext,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>, temperature: f64) -> Self {
        Self {
            messages,
            temperature,
            seed: None,
            schema: None,
            max_tokens: None,
            context: RequestContext::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_schema(mut self, schema: SchemaDescriptor) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn with_context(mut self, context: RequestContext) -> Self {
        self.context = context;
        self
    }

    /// Chat-completions request body. Field order is fixed, so equal inputs
    /// give byte-identical payloads.
    pub fn to_wire(&self, model: &str) -> Value {
        let mut body = serde_json::Map::new();
        body.insert("model".into(), json!(model));
        body.insert("messages".into(), json!(self.messages));
        body.insert("temperature".into(), json!(self.temperature));
        if let Some(seed) = self.seed {
            body.insert("seed".into(), json!(seed));
        }
        if let Some(max) = self.max_tokens {
            body.insert("max_tokens".into(), json!(max));
        }
        if let Some(schema) = &self.schema {
            body.insert("response_format".into(), schema.to_response_format());
        }
        body.insert("stream".into(), json!(false));
        Value::Object(body)
    }

    pub fn wire_bytes(&self, model: &str) -> Vec<u8> {
        serde_json::to_vec(&self.to_wire(model)).expect("request serializes")
    }

    /// Hex SHA-256 over the wire payload and the request context.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.wire_bytes(""));
        hasher.update(serde_json::to_vec(&self.context).expect("context serializes"));
        hex::encode(hasher.finalize())
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("at least one message is required".into()));
        }
        if let Some(schema) = &self.schema {
            if schema.fields.is_empty() {
                return Err(GatewayError::InvalidRequest("schema has no fields".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "status")]
pub enum TransportErrorKind {
    Timeout,
    ConnectionRefused,
    Status(u16),
    EmptyCompletion,
    Malformed,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind:?}: {message}")]
pub struct TransportError {
    pub kind: TransportErrorKind,
    pub message: String,
}

impl TransportError {
    pub fn new(kind: TransportErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    /// Whether retrying the same request may succeed.
    pub fn is_transient(&self) -> bool {
        match self.kind {
            TransportErrorKind::Timeout
            | TransportErrorKind::ConnectionRefused
            | TransportErrorKind::EmptyCompletion => true,
            TransportErrorKind::Status(code) => code == 408 || code == 429 || code >= 500,
            TransportErrorKind::Malformed | TransportErrorKind::Other => false,
        }
    }
}

/// A chat-completions provider.
pub trait ChatBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub error: TransportError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request failed permanently after {} attempt(s): {}", .attempts.len(), .attempts.last().map(|a| a.error.to_string()).unwrap_or_default())]
    Transport { attempts: Vec<AttemptRecord> },
    #[error("no schema-conforming answer after {} attempt(s): {}", .violations.len(), .violations.last().map(ToString::to_string).unwrap_or_default())]
    InvalidStructured { violations: Vec<SchemaViolation> },
}

impl GatewayError {
    pub fn attempts(&self) -> &[AttemptRecord] {
        match self {
            GatewayError::Transport { attempts } => attempts,
            _ => &[],
        }
    }
}

/// Transport retries and structured-output re-asks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before retry `i` is `backoff[min(i, len - 1)]`; empty means no delay.
    pub backoff: Vec<Duration>,
    pub max_reasks: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff: vec![
                Duration::from_millis(500),
                Duration::from_secs(2),
                Duration::from_secs(8),
            ],
            max_reasks: 3,
        }
    }
}

impl RetryPolicy {
    /// No waiting between retries.
    pub fn immediate(max_retries: u32, max_reasks: u32) -> Self {
        Self {
            max_retries,
            backoff: Vec::new(),
            max_reasks,
        }
    }

    fn delay(&self, retry: usize) -> Duration {
        self.backoff
            .get(retry.min(self.backoff.len().saturating_sub(1)))
            .copied()
            .unwrap_or_default()
    }
}

/// One request/response exchange, as written to the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub context: RequestContext,
    pub attempt: u32,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub schema: Option<String>,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// Receives audit entries. Auth tokens never reach the sink.
pub trait AuditSink: Send + Sync {
    fn record(&self, entry: &AuditEntry);
}

/// Caps the number of requests in flight across threads.
#[derive(Debug)]
struct InFlightLimiter {
    cap: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            current: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut current = self.current.lock().expect("limiter lock");
        while *current >= self.cap {
            current = self.freed.wait(current).expect("limiter lock");
        }
        *current += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.current.lock().expect("limiter lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Result of [`Gateway::complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOutcome {
    pub completion: Completion,
    /// Failed attempts that preceded the success.
    pub failed_attempts: Vec<AttemptRecord>,
}

/// Result of [`Gateway::complete_structured`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOutcome {
    pub answers: IndexMap<String, i64>,
    pub reasks: u32,
    pub usage: Usage,
}

/// Thread-safe front end over a backend.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    policy: RetryPolicy,
    limiter: Arc<InFlightLimiter>,
    audit: Option<Arc<dyn AuditSink>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, policy: RetryPolicy, max_in_flight: usize) -> Self {
        Self {
            backend,
            policy,
            limiter: Arc::new(InFlightLimiter::new(max_in_flight)),
            audit: None,
        }
    }

    pub fn with_audit(mut self, sink: Arc<dyn AuditSink>) -> Self {
        self.audit = Some(sink);
        self
    }

    pub fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    fn audit(&self, request: &ChatRequest, attempt: u32, outcome: Result<&Completion, &TransportError>) {
        if let Some(sink) = &self.audit {
            let (response, error) = match outcome {
                Ok(c) => (Some(c.text.clone()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            sink.record(&AuditEntry {
                context: request.context.clone(),
                attempt,
                messages: request.messages.clone(),
                temperature: request.temperature,
                seed: request.seed,
                schema: request.schema.as_ref().map(|s| s.name.clone()),
                response,
                error,
            });
        }
    }

    /// Sends a request, retrying transient transport failures.
    pub fn complete(&self, request: &ChatRequest) -> Result<CompletionOutcome, GatewayError> {
        request.validate()?;
        let mut failed = Vec::new();
        for attempt in 1..=self.policy.max_retries + 1 {
            if attempt > 1 {
                std::thread::sleep(self.policy.delay(attempt as usize - 2));
            }
            let result = {
                let _permit = self.limiter.acquire();
                self.backend.send(request).and_then(|c| {
                    if c.text.trim().is_empty() {
                        Err(TransportError::new(TransportErrorKind::EmptyCompletion, "empty completion"))
                    } else {
                        Ok(c)
                    }
                })
            };
            self.audit(request, attempt, result.as_ref());
            match result {
                Ok(completion) => {
                    return Ok(CompletionOutcome {
                        completion,
                        failed_attempts: failed,
                    })
                }
                Err(error) => {
                    let transient = error.is_transient();
                    log::debug!("attempt {attempt} failed: {error}");
                    failed.push(AttemptRecord { attempt, error });
                    if !transient {
                        break;
                    }
                }
            }
        }
        Err(GatewayError::Transport { attempts: failed })
    }

    /// Requests a schema-conforming answer. Every value is checked locally
    /// against the schema's allowed set; a non-conforming answer is re-asked
    /// with the schema restated, up to the policy's re-ask limit.
    pub fn complete_structured(&self, request: &ChatRequest) -> Result<StructuredOutcome, GatewayError> {
        let schema = request
            .schema
            .clone()
            .ok_or_else(|| GatewayError::InvalidRequest("structured completion needs a schema".into()))?;
        let mut current = request.clone();
        let mut violations = Vec::new();
        let mut usage = Usage::default();
        for reask in 0..=self.policy.max_reasks {
            let outcome = self.complete(&current)?;
            usage += outcome.completion.usage;
            match schema.validate_payload(&outcome.completion.text) {
                Ok(answers) => {
                    return Ok(StructuredOutcome {
                        answers,
                        reasks: reask,
                        usage,
                    })
                }
                Err(violation) => {
                    current.messages.push(ChatMessage::assistant(outcome.completion.text));
                    current.messages.push(ChatMessage::user(format!(
                        "That answer was not valid ({violation}). {}",
                        schema.describe()
                    )));
                    violations.push(violation);
                }
            }
        }
        Err(GatewayError::InvalidStructured { violations })
    }
}

/// Endpoint settings for the HTTP backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Never serialized; read from the environment.
    #[serde(skip)]
    pub auth_token: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: Vec<u64>,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            auth_token: None,
            timeout_secs: 120,
            max_retries: 3,
            backoff_ms: vec![500, 2000, 8000],
            max_in_flight: 16,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout_secs == 0 {
            return Err(GatewayError::InvalidRequest("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::InvalidRequest("max_in_flight must be positive".into()));
        }
        Ok(())
    }

    pub fn retry_policy(&self, max_reasks: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            backoff: self.backoff_ms.iter().map(|&ms| Duration::from_millis(ms)).collect(),
            max_reasks,
        }
    }
}
