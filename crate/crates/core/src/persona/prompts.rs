use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{current_round, AgentRole, PersonaError, PersonaSpec, Reflection, TranscriptMessage};
use crate::gateway::ChatMessage;
use crate::instrument::{response_schema, Construct, ItemKind, SchemaDescriptor};

/// The three reflection axes, asked in this order.
pub const REFLECTION_QUESTIONS: [&str; 3] = [
    "Which emotions were evoked?",
    "Which core values were challenged or supported?",
    "Which questions or uncertainties are there?",
];

/// Fixed instruction texts shared by all personas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub setting: String,
    pub reflection_instruction: String,
    pub response_instruction: String,
    pub questionnaire_preamble: String,
}

impl Default for PromptBundle {
    fn default() -> Self {
        let mut reflection = String::from(
            "Before you reply, reflect privately on the conversation so far. Nobody else will read this reflection. \
             Answer these questions in a few sentences each, in the first person:\n",
        );
        for (i, q) in REFLECTION_QUESTIONS.iter().enumerate() {
            let _ = writeln!(reflection, "{}. {q}", i + 1);
        }
        Self {
            setting: "You are taking part in a one-on-one conversation with another person.".into(),
            reflection_instruction: reflection.trim_end().to_owned(),
            response_instruction: "Now write your next message to the other person. Reply with the message text only, \
                                   as you would say it, in a few sentences."
                .into(),
            questionnaire_preamble: "Fill out the following questionnaire as the person you are, based on how you feel \
                                     right now at this point in the conversation."
                .into(),
        }
    }
}

/// Second-person character sheet, one trait group per line.
pub fn system_prompt(persona: &PersonaSpec) -> String {
    PromptBundle::default().system_prompt(persona)
}

pub fn render_transcript(persona: &PersonaSpec, transcript: &[TranscriptMessage]) -> String {
    let mut out = String::from("Conversation so far:\n");
    if transcript.is_empty() {
        out.push_str("(no messages yet)");
        return out;
    }
    for (i, m) in transcript.iter().enumerate() {
        let who = if m.speaker == persona.role { "You" } else { "Other person" };
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "[round {}] {who}: {}", m.round, m.text);
    }
    out
}

pub fn render_reflection_prompt(persona: &PersonaSpec, transcript: &[TranscriptMessage]) -> Vec<ChatMessage> {
    PromptBundle::default().reflection_prompt(persona, transcript)
}

pub fn render_response_prompt(
    persona: &PersonaSpec,
    transcript: &[TranscriptMessage],
    own_reflection: &Reflection,
) -> Result<Vec<ChatMessage>, PersonaError> {
    PromptBundle::default().response_prompt(persona, transcript, own_reflection)
}

pub fn render_questionnaire_prompt(
    persona: &PersonaSpec,
    transcript: &[TranscriptMessage],
    own_reflection: &Reflection,
    constructs: &[&Construct],
) -> Result<(Vec<ChatMessage>, SchemaDescriptor), PersonaError> {
    PromptBundle::default().questionnaire_prompt(persona, transcript, own_reflection, constructs)
}

fn check_reflection(
    persona: &PersonaSpec,
    transcript: &[TranscriptMessage],
    reflection: &Reflection,
) -> Result<(), PersonaError> {
    if reflection.agent != persona.id {
        return Err(PersonaError::ForeignReflection {
            owner: reflection.agent.clone(),
            agent: persona.id.clone(),
        });
    }
    let current = current_round(transcript);
    if reflection.round != current {
        return Err(PersonaError::StaleReflection {
            reflection_round: reflection.round,
            current_round: current,
        });
    }
    Ok(())
}

fn reflection_section(reflection: &Reflection) -> String {
    format!("Your private reflection:\n{}", reflection.text)
}

impl PromptBundle {
    pub fn system_prompt(&self, persona: &PersonaSpec) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.setting);
        match persona.role {
            AgentRole::Persuader => {
                if let Some(goal) = &persona.goal {
                    let _ = writeln!(out, "Your goal: {goal}.");
                }
                if let Some(strategy) = &persona.strategy {
                    let _ = writeln!(out, "Your approach: {strategy}");
                }
            }
            AgentRole::Recipient => {
                let _ = writeln!(out, "Stay in character as the person described below and speak in the first person.");
            }
        }
        let groups = [
            ("Demographics", &persona.demographics),
            ("Values", &persona.values),
            ("Personality traits", &persona.personality),
        ];
        let mut sheet = String::new();
        for (label, list) in groups {
            if !list.is_empty() {
                let _ = writeln!(sheet, "{label}: {}", list.join(", "));
            }
        }
        if !sheet.is_empty() {
            let _ = write!(out, "\nYou are:\n{sheet}");
        }
        if let Some(extra) = &persona.free_text {
            let _ = write!(out, "\n{extra}\n");
        }
        out.trim_end().to_owned()
    }

    pub fn reflection_prompt(&self, persona: &PersonaSpec, transcript: &[TranscriptMessage]) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(self.system_prompt(persona)),
            ChatMessage::user(render_transcript(persona, transcript)),
            ChatMessage::user(self.reflection_instruction.clone()),
        ]
    }

    pub fn response_prompt(
        &self,
        persona: &PersonaSpec,
        transcript: &[TranscriptMessage],
        own_reflection: &Reflection,
    ) -> Result<Vec<ChatMessage>, PersonaError> {
        check_reflection(persona, transcript, own_reflection)?;
        Ok(vec![
            ChatMessage::system(self.system_prompt(persona)),
            ChatMessage::user(render_transcript(persona, transcript)),
            ChatMessage::user(reflection_section(own_reflection)),
            ChatMessage::user(self.response_instruction.clone()),
        ])
    }

    /// Questionnaire messages and the matching answer schema. Recipients only.
    pub fn questionnaire_prompt(
        &self,
        persona: &PersonaSpec,
        transcript: &[TranscriptMessage],
        own_reflection: &Reflection,
        constructs: &[&Construct],
    ) -> Result<(Vec<ChatMessage>, SchemaDescriptor), PersonaError> {
        if persona.role != AgentRole::Recipient {
            return Err(PersonaError::WrongRole {
                persona: persona.id.clone(),
                expected: AgentRole::Recipient,
                found: persona.role,
            });
        }
        check_reflection(persona, transcript, own_reflection)?;
        let schema = response_schema(constructs)?;

        let mut body = String::new();
        let _ = writeln!(body, "{}", self.questionnaire_preamble);
        for construct in constructs {
            let scale = construct.scale;
            let _ = writeln!(body, "\n{}", construct.prompt);
            if let Some(anchors) = &construct.anchors {
                let _ = writeln!(
                    body,
                    "Scale: {} = {}, {} = {}",
                    scale.min, anchors.low, scale.max, anchors.high
                );
            }
            for item in &construct.items {
                let wording = construct.item_wording(item);
                match &item.kind {
                    ItemKind::Likert => {
                        let _ = writeln!(body, "- {}: {wording}", item.id);
                    }
                    ItemKind::SemanticDifferential {
                        positive_pole,
                        negative_pole,
                    } => {
                        let _ = writeln!(
                            body,
                            "- {}: {wording} ({} = {negative_pole}, {} = {positive_pole})",
                            item.id, scale.min, scale.max
                        );
                    }
                }
            }
        }
        let _ = write!(
            body,
            "\nAnswer with a JSON object that maps every item id above to one integer on its scale."
        );

        Ok((
            vec![
                ChatMessage::system(self.system_prompt(persona)),
                ChatMessage::user(render_transcript(persona, transcript)),
                ChatMessage::user(reflection_section(own_reflection)),
                ChatMessage::user(body),
            ],
            schema,
        ))
    }
}
