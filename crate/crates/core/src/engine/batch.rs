use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{conversation_seed, DialogueConfig, EngineError, Simulation};
use crate::persona::AgentRole;
use crate::store::{ConversationStatus, RunManifest, RunStore, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub dialogues_per_persona: u32,
    /// Recipient persona ids; each gets `dialogues_per_persona` dialogues.
    pub recipients: Vec<String>,
    /// Shared settings. `recipient_id` is replaced per conversation and
    /// `seed` is the batch seed each conversation seed derives from.
    pub dialogue: DialogueConfig,
    pub max_concurrent: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            dialogues_per_persona: 200,
            recipients: vec!["easy".into(), "hard".into()],
            dialogue: DialogueConfig::default(),
            max_concurrent: 8,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.dialogues_per_persona < 1 {
            return Err(EngineError::Config("dialogues_per_persona must be at least 1".into()));
        }
        if self.recipients.is_empty() {
            return Err(EngineError::Config("at least one recipient persona is required".into()));
        }
        if self.max_concurrent < 1 {
            return Err(EngineError::Config("max_concurrent must be at least 1".into()));
        }
        self.dialogue.validate()
    }

    /// Settings for one conversation of the batch.
    pub fn dialogue_for(&self, conversation_id: &str, recipient: &str) -> DialogueConfig {
        DialogueConfig {
            recipient_id: recipient.to_owned(),
            seed: conversation_seed(self.dialogue.seed, conversation_id),
            ..self.dialogue.clone()
        }
    }
}

/// `(conversation_id, recipient_id)` pairs in batch order.
pub fn conversation_ids(batch: &BatchConfig) -> Vec<(String, String)> {
    batch
        .recipients
        .iter()
        .flat_map(|r| (1..=batch.dialogues_per_persona).map(move |i| (format!("{r}-{i:04}"), r.clone())))
        .collect()
}

/// A manifest with every conversation of the batch registered as pending.
/// `config` is stored verbatim as the run's effective configuration.
pub fn batch_manifest(run_id: &str, batch: &BatchConfig, config: serde_json::Value) -> RunManifest {
    let mut manifest = RunManifest::new(run_id, batch.dialogue.model_id.clone(), config);
    for (id, recipient) in conversation_ids(batch) {
        manifest.register(id, recipient);
    }
    manifest
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub total: usize,
    /// Dialogues run to completion in this invocation.
    pub completed: usize,
    pub failed: usize,
    /// Already complete before this invocation.
    pub skipped: usize,
    pub failures: Vec<(String, String)>,
}

impl RunSummary {
    pub fn all_complete(&self) -> bool {
        self.failed == 0 && self.completed + self.skipped == self.total
    }
}

impl Simulation {
    /// Registers the batch's conversations in a new manifest, or checks that
    /// an existing run covers exactly the same conversations.
    pub fn check_run(&self, batch: &BatchConfig, store: &RunStore) -> Result<(), EngineError> {
        let expected: Vec<String> = conversation_ids(batch).into_iter().map(|(id, _)| id).collect();
        let manifest = store.manifest();
        let found: Vec<&String> = manifest.conversations.keys().collect();
        if found.len() != expected.len() || found.iter().zip(&expected).any(|(a, b)| *a != b) {
            return Err(StoreError::ConfigMismatch(format!(
                "run has {} registered conversations, the batch defines {}",
                found.len(),
                expected.len()
            ))
            .into());
        }
        Ok(())
    }

    /// Runs every conversation of the batch that is not complete yet. Partial
    /// streams of earlier attempts are archived first. One dialogue failing
    /// does not stop the others.
    pub fn run_batch(&self, batch: &BatchConfig, store: &RunStore) -> Result<RunSummary, EngineError> {
        batch.validate()?;
        batch.dialogue.schedule.validate(&self.instrument)?;
        self.persona(&batch.dialogue.persuader_id, AgentRole::Persuader)?;
        for r in &batch.recipients {
            self.persona(r, AgentRole::Recipient)?;
        }
        self.check_run(batch, store)?;

        let manifest = store.manifest();
        let all = conversation_ids(batch);
        let mut todo = Vec::new();
        let mut skipped = 0;
        for (id, recipient) in &all {
            if manifest.conversations[id].status == ConversationStatus::Complete {
                skipped += 1;
            } else {
                store.reset_conversation(id)?;
                todo.push((id.clone(), recipient.clone()));
            }
        }
        log::info!("{} conversations to run, {skipped} already complete", todo.len());

        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(String, Result<bool, String>)>> = Mutex::new(Vec::new());
        let fatal: Mutex<Option<StoreError>> = Mutex::new(None);
        let workers = batch.max_concurrent.min(todo.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if fatal.lock().expect("fatal lock").is_some() {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some((id, recipient)) = todo.get(i) else { break };
                    let config = batch.dialogue_for(id, recipient);
                    let outcome = match self.run_dialogue(id, &config, store) {
                        Ok(rec) if rec.completed => Ok(true),
                        Ok(rec) => Err(rec.failure.map(|f| f.message).unwrap_or_else(|| "incomplete".into())),
                        Err(EngineError::Store(e)) => {
                            *fatal.lock().expect("fatal lock") = Some(e);
                            break;
                        }
                        Err(e) => Err(e.to_string()),
                    };
                    let status = match &outcome {
                        Ok(_) => store.set_status(id, ConversationStatus::Complete, None),
                        Err(msg) => store.set_status(id, ConversationStatus::Failed, Some(msg.clone())),
                    };
                    if let Err(e) = status {
                        *fatal.lock().expect("fatal lock") = Some(e);
                        break;
                    }
                    log::info!("{id}: {}", if outcome.is_ok() { "complete" } else { "failed" });
                    results.lock().expect("results lock").push((id.clone(), outcome));
                });
            }
        });
        if let Some(e) = fatal.into_inner().expect("fatal lock") {
            return Err(e.into());
        }
        store.finish()?;

        let mut results = results.into_inner().expect("results lock");
        results.sort_by(|a, b| a.0.cmp(&b.0));
        let mut summary = RunSummary {
            run_id: manifest.run_id.clone(),
            total: all.len(),
            skipped,
            ..RunSummary::default()
        };
        for (id, r) in results {
            match r {
                Ok(_) => summary.completed += 1,
                Err(msg) => {
                    summary.failed += 1;
                    summary.failures.push((id, msg));
                }
            }
        }
        Ok(summary)
    }
}
