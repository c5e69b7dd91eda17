//! Blocking client for OpenAI-compatible `/chat/completions` endpoints.

use std::io::ErrorKind;
use std::time::Duration;

use serde_json::Value;

use super::{BackendConfig, ChatBackend, ChatRequest, Completion, TransportError, TransportErrorKind, Usage};

pub struct OpenAiBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    auth_token: Option<String>,
}

impl OpenAiBackend {
    pub fn new(config: &BackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: completions_url(&config.endpoint),
            model: config.model.clone(),
            auth_token: config.auth_token.clone(),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

/// Accepts a base URL (`http://host/v1`) or the full completions URL.
pub fn completions_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_owned()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

fn map_error(e: ureq::Error) -> TransportError {
    use TransportErrorKind as K;
    let kind = match &e {
        ureq::Error::Timeout(_) => K::Timeout,
        ureq::Error::ConnectionFailed => K::ConnectionRefused,
        ureq::Error::StatusCode(code) => K::Status(*code),
        ureq::Error::Io(io) => match io.kind() {
            ErrorKind::TimedOut | ErrorKind::WouldBlock => K::Timeout,
            ErrorKind::ConnectionRefused
            | ErrorKind::ConnectionReset
            | ErrorKind::ConnectionAborted
            | ErrorKind::BrokenPipe
            | ErrorKind::UnexpectedEof => K::ConnectionRefused,
            _ => K::Other,
        },
        ureq::Error::BodyStalled => K::Timeout,
        _ => K::Other,
    };
    TransportError::new(kind, e.to_string())
}

/// Extracts the first choice's content and token usage.
pub fn parse_completion(body: &str) -> Result<Completion, TransportError> {
    let malformed = |msg: &str| TransportError::new(TransportErrorKind::Malformed, msg.to_owned());
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(&format!("response is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| malformed("response has no choices[0].message.content"))?;
    let text = match text {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        _ => return Err(malformed("message content is not a string")),
    };
    let count = |key: &str| v.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(Completion {
        text,
        usage: Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
        },
    })
}

impl ChatBackend for OpenAiBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError> {
        let mut call = self.agent.post(&self.url).content_type("application/json");
        if let Some(token) = &self.auth_token {
            call = call.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = call.send(request.wire_bytes(&self.model)).map_err(map_error)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(map_error)?;
        if status >= 400 {
            let snippet: String = body.chars().take(200).collect();
            return Err(TransportError::new(TransportErrorKind::Status(status), snippet));
        }
        parse_completion(&body)
    }
}
