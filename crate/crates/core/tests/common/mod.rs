#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use dialogsim::engine::{batch_manifest, BatchConfig, DialogueConfig, QuestionnaireSchedule, RunSummary, Simulation};
use dialogsim::gateway::faults::{FaultInjector, FaultRule};
use dialogsim::gateway::scripted::ScriptedBackend;
use dialogsim::gateway::{AuditSink, ChatBackend, Gateway, RetryPolicy};
use dialogsim::instrument::{builtin_instrument, CENTRAL_CONSTRUCTS};
use dialogsim::persona::builtin_personas;
use dialogsim::store::{load_run, LoadedRun, RunStore};

pub fn scripted() -> Arc<dyn ChatBackend> {
    Arc::new(ScriptedBackend::with_defaults("scripted"))
}

pub fn with_faults(rules: Vec<FaultRule>) -> Arc<dyn ChatBackend> {
    Arc::new(FaultInjector::new(scripted(), rules))
}

pub fn simulation(backend: Arc<dyn ChatBackend>, audit: Option<Arc<dyn AuditSink>>) -> Simulation {
    let mut gateway = Gateway::new(backend, RetryPolicy::immediate(3, 3), 16);
    if let Some(a) = audit {
        gateway = gateway.with_audit(a);
    }
    Simulation::new(builtin_instrument(), builtin_personas().all().into_iter().cloned(), gateway)
}

pub fn batch(per_persona: u32, rounds: u32, samples: u32, seed: u64) -> BatchConfig {
    BatchConfig {
        dialogues_per_persona: per_persona,
        recipients: vec!["easy".into(), "hard".into()],
        dialogue: DialogueConfig {
            rounds,
            samples_per_questionnaire: samples,
            seed,
            model_id: "scripted".into(),
            schedule: QuestionnaireSchedule::uniform(&CENTRAL_CONSTRUCTS),
            ..DialogueConfig::default()
        },
        max_concurrent: 4,
    }
}

/// Creates a run directory for `batch` and runs it.
pub fn run(dir: &Path, batch: &BatchConfig, backend: Arc<dyn ChatBackend>, audit: bool) -> (RunSummary, LoadedRun) {
    let manifest = batch_manifest("test", batch, serde_json::to_value(batch).unwrap());
    let store = RunStore::create(dir, manifest).unwrap();
    let sink: Option<Arc<dyn AuditSink>> = if audit { Some(store.audit_log()) } else { None };
    let summary = simulation(backend, sink).run_batch(batch, &store).unwrap();
    (summary, load_run(dir).unwrap())
}
