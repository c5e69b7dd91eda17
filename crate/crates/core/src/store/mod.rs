//! Run directories: a manifest plus one append-only event stream per
//! conversation.
//!
//! ```text
//! <run>/
//!   manifest.json
//!   conversations/<conversation_id>.jsonl
//!   audit/<conversation_id>.jsonl          (optional request log)
//!   attempts/<conversation_id>.<n>.jsonl   (streams of abandoned attempts)
//! ```

mod events;
mod export;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::DialogueRecord;
use crate::gateway::{AuditEntry, AuditSink};
use crate::instrument::Instrument;
use crate::psychometrics::ResponseSet;

pub use events::{Event, EventKind, EventMeta};
pub use export::{export_csv, ExportTable, ADMINISTRATION_META_COLUMNS, CONSTRUCT_SCORES_HEADER};

pub const RUN_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("conversation `{0}` is not registered in the manifest")]
    Unregistered(String),
    #[error("run is finalized; no further events are accepted")]
    Finalized,
    #[error("run format version {found} is not supported (this build reads version {supported}); migrate the run first")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("{path}, line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("a run already exists at {0}")]
    Exists(PathBuf),
    #[error("no run at {0}")]
    NotFound(PathBuf),
    #[error("existing run was created with a different configuration: {0}")]
    ConfigMismatch(String),
    #[error("unknown export table `{0}` (expected administrations, construct_scores or trajectory)")]
    UnknownTable(String),
    #[error("invalid run data: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationStatus {
    Pending,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationEntry {
    pub persona_id: String,
    pub status: ConversationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Number of earlier attempts archived under `attempts/`.
    #[serde(default)]
    pub archived_attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    pub model_id: String,
    /// Effective configuration the run was started with.
    pub config: Value,
    pub conversations: IndexMap<String, ConversationEntry>,
    #[serde(default)]
    pub finalized: bool,
}

impl RunManifest {
    pub fn new(run_id: impl Into<String>, model_id: impl Into<String>, config: Value) -> Self {
        Self {
            format_version: RUN_FORMAT_VERSION,
            run_id: run_id.into(),
            created_at: Utc::now(),
            finished_at: None,
            model_id: model_id.into(),
            config,
            conversations: IndexMap::new(),
            finalized: false,
        }
    }

    pub fn register(&mut self, conversation_id: impl Into<String>, persona_id: impl Into<String>) {
        self.conversations.insert(
            conversation_id.into(),
            ConversationEntry {
                persona_id: persona_id.into(),
                status: ConversationStatus::Pending,
                error: None,
                archived_attempts: 0,
            },
        );
    }

    pub fn count(&self, status: ConversationStatus) -> usize {
        self.conversations.values().filter(|c| c.status == status).count()
    }

    fn check_version(&self) -> Result<(), StoreError> {
        if self.format_version != RUN_FORMAT_VERSION {
            return Err(StoreError::VersionMismatch {
                found: self.format_version,
                supported: RUN_FORMAT_VERSION,
            });
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn manifest_bytes(manifest: &RunManifest) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    bytes
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, StoreError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(StoreError::NotFound(dir.to_owned()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.clone(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    let found = raw.get("format_version").and_then(Value::as_u64).unwrap_or(0) as u32;
    if found != RUN_FORMAT_VERSION {
        return Err(StoreError::VersionMismatch {
            found,
            supported: RUN_FORMAT_VERSION,
        });
    }
    serde_json::from_value(raw).map_err(|e| StoreError::Corrupt {
        path,
        line: 0,
        reason: e.to_string(),
    })
}

fn conversation_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("conversations").join(format!("{id}.jsonl"))
}

struct Stream {
    file: File,
    next_seq: u64,
}

/// Writable handle on a run directory.
pub struct RunStore {
    dir: PathBuf,
    manifest: Mutex<RunManifest>,
    streams: Mutex<HashMap<String, Arc<Mutex<Stream>>>>,
}

impl RunStore {
    /// Creates a new run directory. Fails if one already exists there.
    pub fn create(dir: impl Into<PathBuf>, manifest: RunManifest) -> Result<Self, StoreError> {
        let dir = dir.into();
        if dir.join(MANIFEST_FILE).exists() {
            return Err(StoreError::Exists(dir));
        }
        for sub in ["conversations", "audit", "attempts"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let path = dir.join(MANIFEST_FILE);
        write_atomic(&path, &manifest_bytes(&manifest))?;
        Ok(Self {
            dir,
            manifest: Mutex::new(manifest),
            streams: Mutex::new(HashMap::new()),
        })
    }

    /// Opens an existing run for further writing.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        let manifest = read_manifest(&dir)?;
        manifest.check_version()?;
        Ok(Self {
            dir,
            manifest: Mutex::new(manifest),
            streams: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> RunManifest {
        self.manifest.lock().expect("manifest lock").clone()
    }

    fn update_manifest(&self, f: impl FnOnce(&mut RunManifest) -> Result<(), StoreError>) -> Result<(), StoreError> {
        let mut manifest = self.manifest.lock().expect("manifest lock");
        let mut next = manifest.clone();
        f(&mut next)?;
        write_atomic(&self.dir.join(MANIFEST_FILE), &manifest_bytes(&next))?;
        *manifest = next;
        Ok(())
    }

    fn stream(&self, conversation_id: &str) -> Result<Arc<Mutex<Stream>>, StoreError> {
        {
            let manifest = self.manifest.lock().expect("manifest lock");
            if manifest.finalized {
                return Err(StoreError::Finalized);
            }
            if !manifest.conversations.contains_key(conversation_id) {
                return Err(StoreError::Unregistered(conversation_id.to_owned()));
            }
        }
        let mut streams = self.streams.lock().expect("stream table lock");
        if let Some(s) = streams.get(conversation_id) {
            return Ok(s.clone());
        }
        let path = conversation_path(&self.dir, conversation_id);
        let next_seq = if path.exists() {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            text.lines().filter(|l| !l.trim().is_empty()).count() as u64
        } else {
            0
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let stream = Arc::new(Mutex::new(Stream { file, next_seq }));
        streams.insert(conversation_id.to_owned(), stream.clone());
        Ok(stream)
    }

    /// Appends one event as a single line written in one call.
    pub fn append_event(&self, conversation_id: &str, event: EventKind, meta: EventMeta) -> Result<Event, StoreError> {
        let stream = self.stream(conversation_id)?;
        let mut stream = stream.lock().expect("stream lock");
        if self.manifest.lock().expect("manifest lock").finalized {
            return Err(StoreError::Finalized);
        }
        let event = Event {
            seq: stream.next_seq,
            event,
            meta,
        };
        let mut line = serde_json::to_vec(&event).expect("event serializes");
        line.push(b'\n');
        let path = conversation_path(&self.dir, conversation_id);
        stream.file.write_all(&line).map_err(io_err(&path))?;
        stream.next_seq += 1;
        Ok(event)
    }

    pub fn set_status(
        &self,
        conversation_id: &str,
        status: ConversationStatus,
        error: Option<String>,
    ) -> Result<(), StoreError> {
        self.update_manifest(|m| {
            let entry = m
                .conversations
                .get_mut(conversation_id)
                .ok_or_else(|| StoreError::Unregistered(conversation_id.to_owned()))?;
            entry.status = status;
            entry.error = error;
            Ok(())
        })
    }

    /// Moves a conversation's stream and audit log to `attempts/` and marks
    /// it pending, so it can be run again from scratch.
    pub fn reset_conversation(&self, conversation_id: &str) -> Result<(), StoreError> {
        self.streams.lock().expect("stream table lock").remove(conversation_id);
        self.update_manifest(|m| {
            if m.finalized {
                return Err(StoreError::Finalized);
            }
            let entry = m
                .conversations
                .get_mut(conversation_id)
                .ok_or_else(|| StoreError::Unregistered(conversation_id.to_owned()))?;
            let n = entry.archived_attempts + 1;
            let mut moved = false;
            for (sub, suffix) in [("conversations", "jsonl"), ("audit", "audit.jsonl")] {
                let from = self.dir.join(sub).join(format!("{conversation_id}.jsonl"));
                if from.exists() {
                    let to = self.dir.join("attempts").join(format!("{conversation_id}.{n}.{suffix}"));
                    fs::create_dir_all(self.dir.join("attempts")).map_err(io_err(&self.dir))?;
                    fs::rename(&from, &to).map_err(io_err(&from))?;
                    moved = true;
                }
            }
            if moved {
                entry.archived_attempts = n;
            }
            entry.status = ConversationStatus::Pending;
            entry.error = None;
            Ok(())
        })
    }

    /// Records the end time; once every conversation is complete the run is
    /// closed for appends.
    pub fn finish(&self) -> Result<bool, StoreError> {
        let mut closed = false;
        self.update_manifest(|m| {
            m.finished_at = Some(Utc::now());
            if m.count(ConversationStatus::Complete) == m.conversations.len() {
                m.finalized = true;
                closed = true;
            }
            Ok(())
        })?;
        Ok(closed)
    }

    /// Unconditionally closes the run for appends.
    pub fn finalize(&self) -> Result<(), StoreError> {
        self.update_manifest(|m| {
            m.finished_at.get_or_insert_with(Utc::now);
            m.finalized = true;
            Ok(())
        })
    }

    /// Request log writer for this run.
    pub fn audit_log(&self) -> Arc<AuditLog> {
        Arc::new(AuditLog::new(self.dir.join("audit")))
    }
}

/// Writes audit entries to `audit/<conversation_id>.jsonl`.
pub struct AuditLog {
    dir: PathBuf,
    files: Mutex<HashMap<String, Arc<Mutex<File>>>>,
}

impl AuditLog {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Mutex::new(HashMap::new()),
        }
    }

    fn file(&self, conversation_id: &str) -> std::io::Result<Arc<Mutex<File>>> {
        let mut files = self.files.lock().expect("audit lock");
        if let Some(f) = files.get(conversation_id) {
            return Ok(f.clone());
        }
        fs::create_dir_all(&self.dir)?;
        let name = if conversation_id.is_empty() { "_unscoped" } else { conversation_id };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(format!("{name}.jsonl")))?;
        let file = Arc::new(Mutex::new(file));
        files.insert(conversation_id.to_owned(), file.clone());
        Ok(file)
    }

    /// Entries logged for one conversation, in order.
    pub fn read(dir: &Path, conversation_id: &str) -> Result<Vec<AuditEntry>, StoreError> {
        let path = dir.join("audit").join(format!("{conversation_id}.jsonl"));
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

impl AuditSink for AuditLog {
    fn record(&self, entry: &AuditEntry) {
        let mut line = serde_json::to_vec(entry).expect("audit entry serializes");
        line.push(b'\n');
        let result = self
            .file(&entry.context.conversation_id)
            .and_then(|f| f.lock().expect("audit file lock").write_all(&line));
        if let Err(e) = result {
            log::warn!("audit log write failed: {e}");
        }
    }
}

/// A line that could not be parsed and was set aside.
#[derive(Debug, Clone, PartialEq)]
pub struct Quarantined {
    pub conversation_id: String,
    pub line: usize,
    pub content: String,
}

/// A run read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    /// Event streams keyed by conversation id, in manifest order.
    pub events: IndexMap<String, Vec<Event>>,
    pub records: Vec<DialogueRecord>,
    pub quarantined: Vec<Quarantined>,
    pub warnings: Vec<String>,
}

/// Reads a run directory. A truncated or unparseable final line of a stream
/// is quarantined with a warning; damage anywhere else is an error.
pub fn load_run(dir: impl AsRef<Path>) -> Result<LoadedRun, StoreError> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut events = IndexMap::new();
    let mut records = Vec::new();
    let mut quarantined = Vec::new();
    let mut warnings = Vec::new();
    for id in manifest.conversations.keys() {
        let path = conversation_path(dir, id);
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let lines: Vec<&str> = text.lines().collect();
        let mut stream = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Event>(line) {
                Ok(e) => stream.push(e),
                Err(e) if i + 1 == lines.len() => {
                    warnings.push(format!("{id}: quarantined unreadable final line {} ({e})", i + 1));
                    log::warn!("{}: quarantined line {}: {e}", path.display(), i + 1);
                    quarantined.push(Quarantined {
                        conversation_id: id.clone(),
                        line: i + 1,
                        content: line.to_string(),
                    });
                }
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        path,
                        line: i + 1,
                        reason: e.to_string(),
                    })
                }
            }
        }
        records.push(DialogueRecord::from_events(id, &stream).map_err(StoreError::Invalid)?);
        events.insert(id.clone(), stream);
    }
    Ok(LoadedRun {
        manifest,
        events,
        records,
        quarantined,
        warnings,
    })
}

impl LoadedRun {
    /// Scored administrations of every record.
    pub fn response_set(&self, instrument: &Instrument) -> Result<ResponseSet, StoreError> {
        let mut set = ResponseSet::new(instrument.clone());
        for record in &self.records {
            for admin in &record.administrations {
                set.push(admin)
                    .map_err(|e| StoreError::Invalid(format!("{}: {e}", admin.conversation_id)))?;
            }
        }
        Ok(set)
    }

    pub fn record(&self, conversation_id: &str) -> Option<&DialogueRecord> {
        self.records.iter().find(|r| r.conversation_id == conversation_id)
    }

    /// Writes the manifest and streams to `dir` in the on-disk format.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), StoreError> {
        let dir = dir.as_ref();
        let conv = dir.join("conversations");
        fs::create_dir_all(&conv).map_err(io_err(&conv))?;
        write_atomic(&dir.join(MANIFEST_FILE), &manifest_bytes(&self.manifest))?;
        for (id, stream) in &self.events {
            let mut bytes = Vec::new();
            for e in stream {
                serde_json::to_writer(&mut bytes, e).expect("event serializes");
                bytes.push(b'\n');
            }
            let path = conversation_path(dir, id);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Hex SHA-256 over model, statuses and event contents; each stream
    /// starts with the dialogue settings it ran under. Run ids, output
    /// locations, timestamps and other metadata are excluded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.manifest.model_id.as_bytes());
        for (id, entry) in &self.manifest.conversations {
            h.update(id.as_bytes());
            h.update(serde_json::to_vec(&entry.status).expect("status serializes"));
            for e in self.events.get(id).into_iter().flatten() {
                h.update(e.seq.to_le_bytes());
                h.update(serde_json::to_vec(&e.event).expect("event serializes"));
            }
        }
        hex::encode(h.finalize())
    }
}
