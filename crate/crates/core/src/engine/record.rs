use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::DialogueConfig;
use crate::gateway::{AttemptRecord, Purpose, Usage};
use crate::instrument::Administration;
use crate::persona::{Reflection, TranscriptMessage};
use crate::store::{Event, EventKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedAdministration {
    pub round: u32,
    pub sample: u32,
    pub constructs: Vec<String>,
    pub reasons: Vec<String>,
}

/// The step at which a dialogue stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub round: u32,
    pub agent: String,
    pub step: Purpose,
    pub sample: Option<u32>,
    pub message: String,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub usage: Usage,
}

/// Everything that happened in one conversation, rebuilt from its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub conversation_id: String,
    pub config: Option<DialogueConfig>,
    pub seed: Option<u64>,
    pub messages: Vec<TranscriptMessage>,
    /// Private to the agent that wrote them.
    pub reflections: Vec<Reflection>,
    pub administrations: Vec<Administration>,
    pub failed_administrations: Vec<FailedAdministration>,
    pub failure: Option<StepFailure>,
    pub completed: bool,
    pub metadata: RecordMetadata,
}

impl DialogueRecord {
    pub fn new(conversation_id: impl Into<String>) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            config: None,
            seed: None,
            messages: Vec::new(),
            reflections: Vec::new(),
            administrations: Vec::new(),
            failed_administrations: Vec::new(),
            failure: None,
            completed: false,
            metadata: RecordMetadata::default(),
        }
    }

    pub fn apply(&mut self, event: &Event) {
        let meta = &event.meta;
        if self.metadata.started_at.is_none() {
            self.metadata.started_at = Some(meta.timestamp);
        }
        self.metadata.finished_at = Some(meta.timestamp);
        if let Some(u) = meta.usage {
            self.metadata.usage += u;
        }
        match &event.event {
            EventKind::Started { seed, config, .. } => {
                self.seed = Some(*seed);
                self.config = Some(config.clone());
            }
            EventKind::Message { round, speaker, text, .. } => self.messages.push(TranscriptMessage {
                round: *round,
                speaker: *speaker,
                text: text.clone(),
            }),
            EventKind::Reflection { round, agent, text, .. } => self.reflections.push(Reflection {
                round: *round,
                agent: agent.clone(),
                text: text.clone(),
            }),
            EventKind::Administration { administration, .. } => self.administrations.push(administration.clone()),
            EventKind::AdministrationFailed {
                round,
                sample,
                constructs,
                reasons,
            } => self.failed_administrations.push(FailedAdministration {
                round: *round,
                sample: *sample,
                constructs: constructs.clone(),
                reasons: reasons.clone(),
            }),
            EventKind::Error {
                round,
                agent,
                step,
                sample,
                message,
                attempts,
            } => {
                self.failure = Some(StepFailure {
                    round: *round,
                    agent: agent.clone(),
                    step: *step,
                    sample: *sample,
                    message: message.clone(),
                    attempts: attempts.clone(),
                })
            }
            EventKind::Completed => self.completed = true,
        }
    }

    /// Rebuilds a record, checking that sequence numbers are contiguous.
    pub fn from_events(conversation_id: &str, events: &[Event]) -> Result<Self, String> {
        let mut record = Self::new(conversation_id);
        for (i, e) in events.iter().enumerate() {
            if e.seq != i as u64 {
                return Err(format!("{conversation_id}: event {i} has sequence number {}", e.seq));
            }
            record.apply(e);
        }
        Ok(record)
    }

    /// The record with timing and token metadata cleared.
    pub fn without_metadata(&self) -> Self {
        Self {
            metadata: RecordMetadata::default(),
            ..self.clone()
        }
    }

    /// Checks the structural invariants of a successful dialogue: message
    /// count, persuader first, strict alternation, round numbering.
    pub fn check_shape(&self, rounds: u32) -> Result<(), String> {
        if self.messages.len() != 2 * rounds as usize {
            return Err(format!("expected {} messages, found {}", 2 * rounds, self.messages.len()));
        }
        for (i, m) in self.messages.iter().enumerate() {
            let expected = if i % 2 == 0 {
                crate::persona::AgentRole::Persuader
            } else {
                crate::persona::AgentRole::Recipient
            };
            if m.speaker != expected {
                return Err(format!("message {i} is from {:?}", m.speaker));
            }
            if m.round != i as u32 / 2 + 1 {
                return Err(format!("message {i} is labelled round {}", m.round));
            }
        }
        Ok(())
    }
}
