//! Agent personas and the prompts rendered from them.
//!
//! Every prompt is built from three inputs only: the agent's own persona, the
//! transcript so far, and the agent's own reflection for the current round.
//! Questionnaire content appears only in [`render_questionnaire_prompt`],
//! whose messages are meant for a throwaway context.

mod prompts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::InstrumentError;

pub use prompts::{
    render_questionnaire_prompt, render_reflection_prompt, render_response_prompt, render_transcript, system_prompt,
    PromptBundle, REFLECTION_QUESTIONS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersonaError {
    #[error("persona `{persona}` has role {found:?}, expected {expected:?}")]
    WrongRole {
        persona: String,
        expected: AgentRole,
        found: AgentRole,
    },
    #[error("reflection is from round {reflection_round} but the agent is about to act in round {current_round}")]
    StaleReflection { reflection_round: u32, current_round: u32 },
    #[error("reflection belongs to `{owner}`, not to `{agent}`")]
    ForeignReflection { owner: String, agent: String },
    #[error("invalid persona `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("persona file could not be parsed: {0}")]
    Parse(String),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Persuader,
    Recipient,
}

impl AgentRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentRole::Persuader => "persuader",
            AgentRole::Recipient => "recipient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub id: String,
    pub role: AgentRole,
    pub label: String,
    #[serde(default)]
    pub demographics: Vec<String>,
    #[serde(default)]
    pub values: Vec<String>,
    #[serde(default)]
    pub personality: Vec<String>,
    /// Persuasion goal; persuaders only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    /// Persuasion strategy instruction. Unset for the built-in persuader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

impl PersonaSpec {
    pub fn validate(&self) -> Result<(), PersonaError> {
        let invalid = |reason: &str| {
            Err(PersonaError::Invalid {
                id: self.id.clone(),
                reason: reason.to_owned(),
            })
        };
        if self.id.trim().is_empty() {
            return invalid("empty id");
        }
        match self.role {
            AgentRole::Recipient => {
                if self.demographics.is_empty() || self.values.is_empty() || self.personality.is_empty() {
                    return invalid("recipients need demographics, values and personality traits");
                }
                if self.goal.is_some() || self.strategy.is_some() {
                    return invalid("recipients carry no persuasion goal or strategy");
                }
            }
            AgentRole::Persuader => {
                if self.goal.as_deref().is_none_or(|g| g.trim().is_empty()) {
                    return invalid("persuaders need a persuasion goal");
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PersonaError> {
        let persona: PersonaSpec = toml::from_str(text).map_err(|e| PersonaError::Parse(e.to_string()))?;
        persona.validate()?;
        Ok(persona)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("persona serializes")
    }
}

fn traits(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// The persuader and the two contrasting recipients.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinPersonas {
    pub persuader: PersonaSpec,
    pub easy_recipient: PersonaSpec,
    pub hard_recipient: PersonaSpec,
}

impl BuiltinPersonas {
    pub fn all(&self) -> [&PersonaSpec; 3] {
        [&self.persuader, &self.easy_recipient, &self.hard_recipient]
    }
}

pub const PERSUASION_GOAL: &str = "persuade the other person to reduce their meat consumption";

pub fn builtin_personas() -> BuiltinPersonas {
    BuiltinPersonas {
        persuader: PersonaSpec {
            id: "persuader".into(),
            role: AgentRole::Persuader,
            label: "Persuader".into(),
            demographics: Vec::new(),
            values: Vec::new(),
            personality: Vec::new(),
            goal: Some(PERSUASION_GOAL.into()),
            strategy: None,
            free_text: None,
        },
        easy_recipient: PersonaSpec {
            id: "easy".into(),
            role: AgentRole::Recipient,
            label: "Easy to Persuade Recipient".into(),
            demographics: traits(&["female", "younger", "living in the city", "high income"]),
            values: traits(&[
                "self-transcendence",
                "openness to change",
                "encouraging empathy towards animals",
            ]),
            personality: traits(&["open", "conscientious"]),
            goal: None,
            strategy: None,
            free_text: None,
        },
        hard_recipient: PersonaSpec {
            id: "hard".into(),
            role: AgentRole::Recipient,
            label: "Hard to Persuade Recipient".into(),
            demographics: traits(&["male", "older", "living on the countryside", "low income"]),
            values: traits(&[
                "self-enhancement",
                "conservation",
                "discouraging empathy towards animals",
            ]),
            personality: traits(&["conservative", "careless"]),
            goal: None,
            strategy: None,
            free_text: None,
        },
    }
}

/// Looks up a built-in persona by id.
pub fn builtin_persona(id: &str) -> Option<PersonaSpec> {
    builtin_personas().all().into_iter().find(|p| p.id == id).cloned()
}

/// One utterance in a conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub round: u32,
    pub speaker: AgentRole,
    pub text: String,
}

/// An agent's private reflection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflection {
    pub round: u32,
    /// Persona id of the reflecting agent.
    pub agent: String,
    pub text: String,
}

/// Round in which the next message of a two-party transcript is produced.
pub fn current_round(transcript: &[TranscriptMessage]) -> u32 {
    transcript.len() as u32 / 2 + 1
}
