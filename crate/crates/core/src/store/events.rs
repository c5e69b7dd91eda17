use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::engine::DialogueConfig;
use crate::gateway::{AttemptRecord, Purpose, Usage};
use crate::instrument::Administration;
use crate::persona::AgentRole;

/// One line of a conversation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Position in the stream, starting at 0.
    pub seq: u64,
    pub event: EventKind,
    /// Excluded from fingerprints.
    pub meta: EventMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Started {
        persuader_id: String,
        recipient_id: String,
        model_id: String,
        /// Seed the conversation's sub-seeds derive from.
        seed: u64,
        config: DialogueConfig,
    },
    Message {
        round: u32,
        speaker: AgentRole,
        agent: String,
        text: String,
    },
    Reflection {
        round: u32,
        agent: String,
        /// Always true; reflections are never shown to the other agent.
        private: bool,
        text: String,
    },
    Administration {
        #[serde(flatten)]
        administration: Administration,
        reasks: u32,
    },
    AdministrationFailed {
        round: u32,
        sample: u32,
        constructs: Vec<String>,
        reasons: Vec<String>,
    },
    Error {
        round: u32,
        agent: String,
        step: Purpose,
        sample: Option<u32>,
        message: String,
        attempts: Vec<AttemptRecord>,
    },
    Completed,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Started { .. } => "started",
            EventKind::Message { .. } => "message",
            EventKind::Reflection { .. } => "reflection",
            EventKind::Administration { .. } => "administration",
            EventKind::AdministrationFailed { .. } => "administration_failed",
            EventKind::Error { .. } => "error",
            EventKind::Completed => "completed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl EventMeta {
    pub fn now() -> Self {
        Self {
            timestamp: Utc::now(),
            usage: None,
            elapsed_ms: None,
        }
    }

    pub fn with_usage(mut self, usage: Usage) -> Self {
        self.usage = Some(usage);
        self
    }
}
