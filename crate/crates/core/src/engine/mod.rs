//! The per-round dialogue state machine and batch runner.
//!
//! Each round: the persuader reflects and responds; the recipient reflects,
//! answers the scheduled questionnaire `samples_per_questionnaire` times in
//! a throwaway branch, then responds. Rounds are 1-based and close with the
//! recipient's message.

mod batch;
mod dialogue;
mod record;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::Purpose;
use crate::instrument::{Instrument, InstrumentError, CENTRAL_CONSTRUCTS};
use crate::persona::PersonaError;
use crate::store::StoreError;

pub use batch::{batch_manifest, conversation_ids, BatchConfig, RunSummary};
pub use dialogue::{branch_context_for_questionnaire, DialogueState, EventSink, MemorySink, QuestionnaireBranch, Simulation};
pub use record::{DialogueRecord, FailedAdministration, RecordMetadata, StepFailure};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Which constructs are administered in which round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireSchedule {
    /// Administered in every round.
    pub every_round: Vec<String>,
    /// Added in the last round only.
    #[serde(default)]
    pub final_round: Vec<String>,
    /// Constructs for an extra measurement after the last message. Off when
    /// unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_conversation: Option<Vec<String>>,
}

impl Default for QuestionnaireSchedule {
    fn default() -> Self {
        Self {
            every_round: CENTRAL_CONSTRUCTS.iter().map(|s| s.to_string()).collect(),
            final_round: vec!["threat_to_freedom".into(), "meat_attachment".into()],
            post_conversation: None,
        }
    }
}

impl QuestionnaireSchedule {
    /// The same constructs in every round, nothing extra.
    pub fn uniform(constructs: &[&str]) -> Self {
        Self {
            every_round: constructs.iter().map(|s| s.to_string()).collect(),
            final_round: Vec::new(),
            post_conversation: None,
        }
    }

    /// Constructs for `round` in instrument order. Round `rounds + 1` is the
    /// post-conversation measurement.
    pub fn constructs_for(&self, round: u32, rounds: u32, instrument: &Instrument) -> Vec<String> {
        let mut wanted: BTreeSet<&str> = BTreeSet::new();
        if round <= rounds {
            wanted.extend(self.every_round.iter().map(String::as_str));
            if round == rounds {
                wanted.extend(self.final_round.iter().map(String::as_str));
            }
        } else if round == rounds + 1 {
            if let Some(post) = &self.post_conversation {
                wanted.extend(post.iter().map(String::as_str));
            }
        }
        instrument
            .constructs()
            .iter()
            .filter(|c| wanted.contains(c.id.as_str()))
            .map(|c| c.id.clone())
            .collect()
    }

    pub fn validate(&self, instrument: &Instrument) -> Result<(), InstrumentError> {
        let all = self
            .every_round
            .iter()
            .chain(&self.final_round)
            .chain(self.post_conversation.iter().flatten());
        for id in all {
            instrument.require_construct(id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueConfig {
    pub rounds: u32,
    pub samples_per_questionnaire: u32,
    pub temperature: f64,
    pub seed: u64,
    pub persuader_id: String,
    pub recipient_id: String,
    pub model_id: String,
    pub schedule: QuestionnaireSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl Default for DialogueConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            samples_per_questionnaire: 10,
            temperature: 0.6,
            seed: 0,
            persuader_id: "persuader".into(),
            recipient_id: "easy".into(),
            model_id: String::new(),
            schedule: QuestionnaireSchedule::default(),
            max_tokens: None,
        }
    }
}

impl DialogueConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.rounds < 1 {
            return Err(EngineError::Config("rounds must be at least 1".into()));
        }
        if self.samples_per_questionnaire < 1 {
            return Err(EngineError::Config("samples_per_questionnaire must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(EngineError::Config("temperature must be non-negative".into()));
        }
        Ok(())
    }

    /// Number of messages a successful dialogue produces.
    pub fn expected_messages(&self) -> usize {
        2 * self.rounds as usize
    }
}

/// Seed for one request, derived from the conversation seed and the step.
pub fn sub_seed(conversation_seed: u64, round: u32, agent: &str, purpose: Purpose, sample: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(conversation_seed.to_le_bytes());
    h.update(round.to_le_bytes());
    h.update(agent.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(&purpose).expect("purpose serializes"));
    h.update(sample.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Seed of one conversation within a batch.
pub fn conversation_seed(batch_seed: u64, conversation_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(batch_seed.to_le_bytes());
    h.update(conversation_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
