use std::sync::Mutex;
use std::time::Instant;

use indexmap::IndexMap;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{sub_seed, DialogueConfig, DialogueRecord, EngineError};
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError, Purpose, RequestContext, Usage};
use crate::instrument::{Administration, Instrument, SchemaDescriptor};
use crate::persona::{current_round, AgentRole, PersonaError, PersonaSpec, PromptBundle, Reflection, TranscriptMessage};
use crate::store::{Event, EventKind, EventMeta, RunStore, StoreError};

/// Destination for dialogue events.
pub trait EventSink: Sync {
    fn emit(&self, conversation_id: &str, event: EventKind, meta: EventMeta) -> Result<Event, StoreError>;
}

impl EventSink for RunStore {
    fn emit(&self, conversation_id: &str, event: EventKind, meta: EventMeta) -> Result<Event, StoreError> {
        self.append_event(conversation_id, event, meta)
    }
}

/// Keeps events in memory; useful for tests and dry runs.
#[derive(Debug, Default)]
pub struct MemorySink {
    streams: Mutex<IndexMap<String, Vec<Event>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self, conversation_id: &str) -> Vec<Event> {
        self.streams
            .lock()
            .expect("sink lock")
            .get(conversation_id)
            .cloned()
            .unwrap_or_default()
    }
}

impl EventSink for MemorySink {
    fn emit(&self, conversation_id: &str, event: EventKind, meta: EventMeta) -> Result<Event, StoreError> {
        let mut streams = self.streams.lock().expect("sink lock");
        let stream = streams.entry(conversation_id.to_owned()).or_default();
        let event = Event {
            seq: stream.len() as u64,
            event,
            meta,
        };
        stream.push(event.clone());
        Ok(event)
    }
}

/// The main context of a dialogue: the shared transcript and every private
/// reflection so far. Questionnaires never write to it.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DialogueState {
    pub transcript: Vec<TranscriptMessage>,
    pub reflections: Vec<Reflection>,
}

impl DialogueState {
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("state serializes")))
    }

    /// The agent's reflection for the round it is about to act in.
    pub fn current_reflection(&self, agent_id: &str) -> Option<&Reflection> {
        let round = current_round(&self.transcript);
        self.reflections
            .iter()
            .rev()
            .find(|r| r.agent == agent_id && r.round == round)
    }
}

/// A disposable copy of the recipient's context with the questionnaire
/// appended.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionnaireBranch {
    pub round: u32,
    pub constructs: Vec<String>,
    pub messages: Vec<ChatMessage>,
    pub schema: SchemaDescriptor,
}

/// Builds the questionnaire branch from persona, transcript and the
/// recipient's reflection for the current round.
pub fn branch_context_for_questionnaire(
    state: &DialogueState,
    recipient: &PersonaSpec,
    instrument: &Instrument,
    constructs: &[String],
    prompts: &PromptBundle,
) -> Result<QuestionnaireBranch, PersonaError> {
    let round = current_round(&state.transcript);
    let reflection = state
        .current_reflection(&recipient.id)
        .ok_or(PersonaError::StaleReflection {
            reflection_round: state
                .reflections
                .iter()
                .rev()
                .find(|r| r.agent == recipient.id)
                .map_or(0, |r| r.round),
            current_round: round,
        })?;
    let selected = instrument.select(constructs)?;
    let (messages, schema) = prompts.questionnaire_prompt(recipient, &state.transcript, reflection, &selected)?;
    Ok(QuestionnaireBranch {
        round,
        constructs: constructs.to_vec(),
        messages,
        schema,
    })
}

/// Instrument, personas, prompts and gateway shared by every dialogue.
#[derive(Clone)]
pub struct Simulation {
    pub instrument: Instrument,
    pub personas: IndexMap<String, PersonaSpec>,
    pub prompts: PromptBundle,
    pub gateway: Gateway,
}

impl Simulation {
    pub fn new(instrument: Instrument, personas: impl IntoIterator<Item = PersonaSpec>, gateway: Gateway) -> Self {
        Self {
            instrument,
            personas: personas.into_iter().map(|p| (p.id.clone(), p)).collect(),
            prompts: PromptBundle::default(),
            gateway,
        }
    }

    pub fn persona(&self, id: &str, role: AgentRole) -> Result<&PersonaSpec, EngineError> {
        let p = self
            .personas
            .get(id)
            .ok_or_else(|| EngineError::Config(format!("unknown persona `{id}`")))?;
        if p.role != role {
            return Err(PersonaError::WrongRole {
                persona: id.to_owned(),
                expected: role,
                found: p.role,
            }
            .into());
        }
        Ok(p)
    }

    /// Runs one conversation, streaming its events to `sink`. Gateway
    /// failures end the dialogue with an error event; the returned record
    /// then has `failure` set.
    pub fn run_dialogue(
        &self,
        conversation_id: &str,
        config: &DialogueConfig,
        sink: &dyn EventSink,
    ) -> Result<DialogueRecord, EngineError> {
        config.validate()?;
        config.schedule.validate(&self.instrument)?;
        let persuader = self.persona(&config.persuader_id, AgentRole::Persuader)?;
        let recipient = self.persona(&config.recipient_id, AgentRole::Recipient)?;
        let mut run = Run {
            sim: self,
            config,
            id: conversation_id,
            sink,
            record: DialogueRecord::new(conversation_id),
            state: DialogueState::default(),
        };
        run.emit(
            EventKind::Started {
                persuader_id: persuader.id.clone(),
                recipient_id: recipient.id.clone(),
                model_id: config.model_id.clone(),
                seed: config.seed,
                config: config.clone(),
            },
            EventMeta::now(),
        )?;
        let _ = run.execute(persuader, recipient)?;
        Ok(run.record)
    }
}

struct Run<'a> {
    sim: &'a Simulation,
    config: &'a DialogueConfig,
    id: &'a str,
    sink: &'a dyn EventSink,
    record: DialogueRecord,
    state: DialogueState,
}

/// Marker for a dialogue stopped by a gateway failure.
struct Stopped;

impl Run<'_> {
    fn emit(&mut self, kind: EventKind, meta: EventMeta) -> Result<(), EngineError> {
        let event = self.sink.emit(self.id, kind, meta)?;
        self.record.apply(&event);
        Ok(())
    }

    fn context(&self, agent: &PersonaSpec, round: u32, purpose: Purpose, sample: Option<u32>) -> RequestContext {
        RequestContext {
            conversation_id: self.id.to_owned(),
            agent_id: agent.id.clone(),
            round,
            purpose: Some(purpose),
            sample,
        }
    }

    fn request(&self, agent: &PersonaSpec, round: u32, purpose: Purpose, sample: u32, messages: Vec<ChatMessage>) -> ChatRequest {
        let mut req = ChatRequest::new(messages, self.config.temperature)
            .with_seed(sub_seed(self.config.seed, round, &agent.id, purpose, sample))
            .with_context(self.context(agent, round, purpose, (purpose == Purpose::Questionnaire).then_some(sample)));
        req.max_tokens = self.config.max_tokens;
        req
    }

    fn fail(&mut self, agent: &PersonaSpec, round: u32, step: Purpose, sample: Option<u32>, err: GatewayError) -> Result<Stopped, EngineError> {
        log::warn!("{}: {step:?} step of `{}` in round {round} failed: {err}", self.id, agent.id);
        self.emit(
            EventKind::Error {
                round,
                agent: agent.id.clone(),
                step,
                sample,
                message: err.to_string(),
                attempts: err.attempts().to_vec(),
            },
            EventMeta::now(),
        )?;
        Ok(Stopped)
    }

    fn text(
        &mut self,
        agent: &PersonaSpec,
        round: u32,
        purpose: Purpose,
        messages: Vec<ChatMessage>,
    ) -> Result<Result<(String, EventMeta), Stopped>, EngineError> {
        let req = self.request(agent, round, purpose, 0, messages);
        let start = Instant::now();
        match self.sim.gateway.complete(&req) {
            Ok(out) => {
                let mut meta = EventMeta::now().with_usage(out.completion.usage);
                meta.elapsed_ms = Some(start.elapsed().as_millis() as u64);
                Ok(Ok((out.completion.text.trim().to_owned(), meta)))
            }
            Err(e) => self.fail(agent, round, purpose, None, e).map(Err),
        }
    }

    fn reflect(&mut self, agent: &PersonaSpec, round: u32) -> Result<Result<(), Stopped>, EngineError> {
        let prompt = self.sim.prompts.reflection_prompt(agent, &self.state.transcript);
        let (text, meta) = match self.text(agent, round, Purpose::Reflect, prompt)? {
            Ok(v) => v,
            Err(s) => return Ok(Err(s)),
        };
        self.emit(
            EventKind::Reflection {
                round,
                agent: agent.id.clone(),
                private: true,
                text: text.clone(),
            },
            meta,
        )?;
        self.state.reflections.push(Reflection {
            round,
            agent: agent.id.clone(),
            text,
        });
        Ok(Ok(()))
    }

    fn respond(&mut self, agent: &PersonaSpec, round: u32) -> Result<Result<(), Stopped>, EngineError> {
        let reflection = self
            .state
            .current_reflection(&agent.id)
            .cloned()
            .ok_or_else(|| EngineError::Config(format!("`{}` has no reflection for round {round}", agent.id)))?;
        let prompt = self.sim.prompts.response_prompt(agent, &self.state.transcript, &reflection)?;
        let (text, meta) = match self.text(agent, round, Purpose::Respond, prompt)? {
            Ok(v) => v,
            Err(s) => return Ok(Err(s)),
        };
        self.emit(
            EventKind::Message {
                round,
                speaker: agent.role,
                agent: agent.id.clone(),
                text: text.clone(),
            },
            meta,
        )?;
        self.state.transcript.push(TranscriptMessage {
            round,
            speaker: agent.role,
            text,
        });
        Ok(Ok(()))
    }

    fn questionnaire(&mut self, recipient: &PersonaSpec, round: u32) -> Result<Result<(), Stopped>, EngineError> {
        let sim = self.sim;
        let constructs = self.config.schedule.constructs_for(round, self.config.rounds, &sim.instrument);
        if constructs.is_empty() {
            return Ok(Ok(()));
        }
        let branch = branch_context_for_questionnaire(&self.state, recipient, &sim.instrument, &constructs, &sim.prompts)?;
        for sample in 1..=self.config.samples_per_questionnaire {
            let req = self
                .request(recipient, round, Purpose::Questionnaire, sample, branch.messages.clone())
                .with_schema(branch.schema.clone());
            let start = Instant::now();
            match sim.gateway.complete_structured(&req) {
                Ok(out) => {
                    let admin = Administration {
                        conversation_id: self.id.to_owned(),
                        round,
                        sample,
                        persona_id: recipient.id.clone(),
                        model_id: self.config.model_id.clone(),
                        constructs: constructs.clone(),
                        answers: out.answers,
                    };
                    let mut meta = EventMeta::now().with_usage(out.usage);
                    meta.elapsed_ms = Some(start.elapsed().as_millis() as u64);
                    match sim.instrument.validate_administration(admin) {
                        Ok(valid) => self.emit(
                            EventKind::Administration {
                                administration: valid.into_inner(),
                                reasks: out.reasks,
                            },
                            meta,
                        )?,
                        Err(errors) => self.emit(
                            EventKind::AdministrationFailed {
                                round,
                                sample,
                                constructs: constructs.clone(),
                                reasons: errors.0.iter().map(ToString::to_string).collect(),
                            },
                            meta,
                        )?,
                    }
                }
                Err(GatewayError::InvalidStructured { violations }) => {
                    log::warn!("{}: administration {round}/{sample} failed after re-asks", self.id);
                    self.emit(
                        EventKind::AdministrationFailed {
                            round,
                            sample,
                            constructs: constructs.clone(),
                            reasons: violations.iter().map(ToString::to_string).collect(),
                        },
                        EventMeta::now().with_usage(Usage::default()),
                    )?;
                }
                Err(e) => return self.fail(recipient, round, Purpose::Questionnaire, Some(sample), e).map(Err),
            }
        }
        Ok(Ok(()))
    }

    fn execute(&mut self, persuader: &PersonaSpec, recipient: &PersonaSpec) -> Result<Result<(), Stopped>, EngineError> {
        macro_rules! step {
            ($e:expr) => {
                if let Err(stopped) = $e? {
                    return Ok(Err(stopped));
                }
            };
        }
        let rounds = self.config.rounds;
        for round in 1..=rounds {
            step!(self.reflect(persuader, round));
            step!(self.respond(persuader, round));
            step!(self.reflect(recipient, round));
            step!(self.questionnaire(recipient, round));
            step!(self.respond(recipient, round));
        }
        if self.config.schedule.post_conversation.is_some() {
            step!(self.reflect(recipient, rounds + 1));
            step!(self.questionnaire(recipient, rounds + 1));
        }
        self.emit(EventKind::Completed, EventMeta::now())?;
        Ok(Ok(()))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::QuestionnaireSchedule;
    use crate::gateway::scripted::ScriptedBackend;
    use crate::gateway::RetryPolicy;
    use crate::instrument::builtin_instrument;
    use crate::persona::builtin_personas;

    fn sim() -> Simulation {
        let gw = Gateway::new(Arc::new(ScriptedBackend::with_defaults("scripted")), RetryPolicy::immediate(0, 3), 4);
        Simulation::new(builtin_instrument(), builtin_personas().all().into_iter().cloned(), gw)
    }

    fn config(rounds: u32) -> DialogueConfig {
        DialogueConfig {
            rounds,
            seed: 11,
            recipient_id: "hard".into(),
            model_id: "scripted".into(),
            ..DialogueConfig::default()
        }
    }

    #[test]
    fn full_dialogue_counts() {
        let sink = MemorySink::new();
        let mut cfg = config(5);
        cfg.schedule = QuestionnaireSchedule::uniform(&crate::instrument::CENTRAL_CONSTRUCTS);
        let rec = sim().run_dialogue("hard-0001", &cfg, &sink).unwrap();
        assert!(rec.completed);
        rec.check_shape(5).unwrap();
        assert_eq!(rec.reflections.len(), 10);
        assert_eq!(rec.administrations.len(), 50);
        let replay = DialogueRecord::from_events("hard-0001", &sink.events("hard-0001")).unwrap();
        assert_eq!(replay, rec);
    }

    #[test]
    fn single_round() {
        let rec = sim().run_dialogue("c", &config(1), &MemorySink::new()).unwrap();
        assert_eq!(rec.messages.len(), 2);
        assert_eq!(rec.messages[0].speaker, AgentRole::Persuader);
        // the only round is also the last, so the final-round constructs join
        assert_eq!(rec.administrations[0].constructs.len(), 8);
    }

    #[test]
    fn post_conversation_measurement() {
        let mut cfg = config(2);
        cfg.samples_per_questionnaire = 2;
        cfg.schedule.post_conversation = Some(vec!["intention".into()]);
        let rec = sim().run_dialogue("c", &cfg, &MemorySink::new()).unwrap();
        assert_eq!(rec.messages.len(), 4);
        let post: Vec<_> = rec.administrations.iter().filter(|a| a.round == 3).collect();
        assert_eq!(post.len(), 2);
        assert_eq!(post[0].constructs, vec!["intention"]);
    }

    #[test]
    fn branch_leaves_state_untouched() {
        let s = sim();
        let p = builtin_personas();
        let state = DialogueState {
            transcript: vec![TranscriptMessage {
                round: 1,
                speaker: AgentRole::Persuader,
                text: "hello".into(),
            }],
            reflections: vec![Reflection {
                round: 1,
                agent: "easy".into(),
                text: "I feel curious.".into(),
            }],
        };
        let before = state.fingerprint();
        let branch =
            branch_context_for_questionnaire(&state, &p.easy_recipient, &s.instrument, &["intention".into()], &s.prompts)
                .unwrap();
        assert!(branch.messages.iter().any(|m| m.content.contains("I feel curious.")));
        assert_eq!(state.fingerprint(), before);

        let empty = DialogueState::default();
        assert!(branch_context_for_questionnaire(&empty, &p.easy_recipient, &s.instrument, &["intention".into()], &s.prompts)
            .is_err());
    }

    #[test]
    fn wrong_roles_rejected() {
        let mut cfg = config(1);
        cfg.recipient_id = "persuader".into();
        assert!(sim().run_dialogue("c", &cfg, &MemorySink::new()).is_err());
    }
}
