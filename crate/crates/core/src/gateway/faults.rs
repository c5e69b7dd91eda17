//! Backend wrapper that injects failures on matching requests.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, Completion, Purpose, TransportError, TransportErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FaultKind {
    /// The first `times` matching sends fail with a 503.
    Transient { times: u32 },
    /// Every matching send fails with a 400.
    Permanent,
    /// The first `times` matching sends return a payload that breaks the schema.
    InvalidPayload { times: u32 },
}

/// Matches requests by context; `None` fields match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRule {
    pub conversation_id: Option<String>,
    pub purpose: Option<Purpose>,
    pub round: Option<u32>,
    pub sample: Option<u32>,
    pub fault: FaultKind,
}

impl FaultRule {
    pub fn any(fault: FaultKind) -> Self {
        Self {
            conversation_id: None,
            purpose: None,
            round: None,
            sample: None,
            fault,
        }
    }

    pub fn conversation(mut self, id: impl Into<String>) -> Self {
        self.conversation_id = Some(id.into());
        self
    }

    pub fn purpose(mut self, purpose: Purpose) -> Self {
        self.purpose = Some(purpose);
        self
    }

    pub fn round(mut self, round: u32) -> Self {
        self.round = Some(round);
        self
    }

    pub fn sample(mut self, sample: u32) -> Self {
        self.sample = Some(sample);
        self
    }

    fn matches(&self, request: &ChatRequest) -> bool {
        let ctx = &request.context;
        self.conversation_id.as_ref().is_none_or(|c| *c == ctx.conversation_id)
            && self.purpose.is_none_or(|p| Some(p) == ctx.purpose)
            && self.round.is_none_or(|r| r == ctx.round)
            && self.sample.is_none_or(|s| Some(s) == ctx.sample)
    }
}

type CallKey = (usize, String, u32, Option<Purpose>, Option<u32>);

pub struct FaultInjector {
    inner: Arc<dyn ChatBackend>,
    rules: Vec<FaultRule>,
    seen: Mutex<HashMap<CallKey, u32>>,
}

impl FaultInjector {
    pub fn new(inner: Arc<dyn ChatBackend>, rules: Vec<FaultRule>) -> Self {
        Self {
            inner,
            rules,
            seen: Mutex::new(HashMap::new()),
        }
    }

    /// Times rule `index` has fired so far.
    pub fn fired(&self, index: usize) -> u32 {
        self.seen
            .lock()
            .expect("fault counter")
            .iter()
            .filter(|(k, _)| k.0 == index)
            .map(|(_, n)| *n)
            .sum()
    }
}

impl ChatBackend for FaultInjector {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError> {
        for (index, rule) in self.rules.iter().enumerate() {
            if !rule.matches(request) {
                continue;
            }
            let ctx = &request.context;
            let key = (index, ctx.conversation_id.clone(), ctx.round, ctx.purpose, ctx.sample);
            let mut seen = self.seen.lock().expect("fault counter");
            let count = seen.entry(key).or_insert(0);
            match rule.fault {
                FaultKind::Permanent => {
                    *count += 1;
                    return Err(TransportError::new(TransportErrorKind::Status(400), "injected permanent failure"));
                }
                FaultKind::Transient { times } if *count < times => {
                    *count += 1;
                    return Err(TransportError::new(TransportErrorKind::Status(503), "injected transient failure"));
                }
                FaultKind::InvalidPayload { times } if *count < times => {
                    *count += 1;
                    return Ok(Completion {
                        text: "{\"answer\": \"seven\"}".into(),
                        usage: Default::default(),
                    });
                }
                _ => {}
            }
        }
        self.inner.send(request)
    }
}
