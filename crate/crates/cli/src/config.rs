//! Config file schema and override resolution.
//!
//! Precedence, lowest first: built-in defaults, the TOML file, environment
//! variables, command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dialogsim::engine::{BatchConfig, DialogueConfig, QuestionnaireSchedule};
use dialogsim::gateway::BackendConfig;

pub const ENV_ENDPOINT: &str = "DIALOGSIM_ENDPOINT";
pub const ENV_MODEL: &str = "DIALOGSIM_MODEL";
pub const ENV_API_KEY: &str = "DIALOGSIM_API_KEY";
pub const ENV_MAX_IN_FLIGHT: &str = "DIALOGSIM_MAX_IN_FLIGHT";

pub const SCRIPTED_MODEL: &str = "scripted";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Openai,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dialogues_per_persona: u32,
    pub recipients: Vec<String>,
    pub persuader: String,
    pub rounds: u32,
    pub samples: u32,
    pub temperature: f64,
    pub seed: u64,
    pub concurrency: usize,
    pub max_tokens: Option<u32>,
    pub schedule: QuestionnaireSchedule,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = DialogueConfig::default();
        let b = BatchConfig::default();
        Self {
            dialogues_per_persona: b.dialogues_per_persona,
            recipients: b.recipients,
            persuader: d.persuader_id,
            rounds: d.rounds,
            samples: d.samples_per_questionnaire,
            temperature: d.temperature,
            seed: d.seed,
            concurrency: b.max_concurrent,
            max_tokens: None,
            schedule: d.schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: Vec<u64>,
    pub max_in_flight: usize,
    pub max_reasks: u32,
    /// Never written to disk.
    #[serde(skip)]
    pub auth_token: Option<String>,
}

impl Default for BackendSection {
    fn default() -> Self {
        let b = BackendConfig::default();
        Self {
            kind: BackendKind::Openai,
            endpoint: b.endpoint,
            model: b.model,
            timeout_secs: b.timeout_secs,
            max_retries: b.max_retries,
            backoff_ms: b.backoff_ms,
            max_in_flight: b.max_in_flight,
            max_reasks: 3,
            auth_token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub audit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InputsSection {
    /// Instrument TOML replacing the built-in battery.
    pub instrument: Option<PathBuf>,
    /// Additional persona TOML files.
    pub personas: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub simulation: SimulationSection,
    pub backend: BackendSection,
    pub output: OutputSection,
    pub inputs: InputsSection,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Config file (TOML).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// OpenAI-compatible base URL, e.g. http://localhost:8000/v1
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Dialogues per recipient persona.
    #[arg(long)]
    pub dialogues: Option<u32>,
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Questionnaire samples per round.
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recipient persona ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub personas: Option<Vec<String>>,
    /// Concurrent dialogues.
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Run directory.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Write the request/response log under audit/.
    #[arg(long)]
    pub audit: bool,
    /// Also measure once after the last message.
    #[arg(long)]
    pub post_measurement: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolves file, environment and flags into one effective config.
    pub fn resolve(flags: &Overrides, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        if let Some(v) = env(ENV_ENDPOINT) {
            cfg.backend.endpoint = v;
        }
        if let Some(v) = env(ENV_MODEL) {
            cfg.backend.model = v;
        }
        if let Some(v) = env(ENV_MAX_IN_FLIGHT) {
            cfg.backend.max_in_flight = v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                name: ENV_MAX_IN_FLIGHT,
                message: e.to_string(),
            })?;
        }
        cfg.backend.auth_token = env(ENV_API_KEY).filter(|t| !t.is_empty());

        let s = &mut cfg.simulation;
        if let Some(v) = flags.dialogues {
            s.dialogues_per_persona = v;
        }
        if let Some(v) = flags.rounds {
            s.rounds = v;
        }
        if let Some(v) = flags.samples {
            s.samples = v;
        }
        if let Some(v) = flags.temperature {
            s.temperature = v;
        }
        if let Some(v) = flags.seed {
            s.seed = v;
        }
        if let Some(v) = &flags.personas {
            s.recipients = v.clone();
        }
        if let Some(v) = flags.concurrency {
            s.concurrency = v;
        }
        if flags.post_measurement && s.schedule.post_conversation.is_none() {
            s.schedule.post_conversation = Some(s.schedule.every_round.clone());
        }
        let b = &mut cfg.backend;
        if let Some(v) = flags.backend {
            b.kind = v;
        }
        if let Some(v) = &flags.endpoint {
            b.endpoint = v.clone();
        }
        if let Some(v) = &flags.model {
            b.model = v.clone();
        }
        if let Some(v) = flags.max_in_flight {
            b.max_in_flight = v;
        }
        if let Some(v) = &flags.out {
            cfg.output.dir = Some(v.clone());
        }
        if flags.audit {
            cfg.output.audit = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        let s = &self.simulation;
        if s.dialogues_per_persona < 1 {
            return invalid("dialogues per persona must be at least 1");
        }
        if s.rounds < 1 {
            return invalid("rounds must be at least 1");
        }
        if s.samples < 1 {
            return invalid("samples must be at least 1");
        }
        if !(s.temperature >= 0.0 && s.temperature.is_finite()) {
            return invalid("temperature must be non-negative");
        }
        if s.recipients.is_empty() {
            return invalid("at least one recipient persona is required");
        }
        if s.concurrency < 1 {
            return invalid("concurrency must be at least 1");
        }
        let b = &self.backend;
        if b.kind == BackendKind::Openai {
            if b.endpoint.trim().is_empty() {
                return invalid("no model endpoint configured; set backend.endpoint, DIALOGSIM_ENDPOINT or --endpoint, or use --backend scripted");
            }
            if b.model.trim().is_empty() {
                return invalid("no model name configured; set backend.model, DIALOGSIM_MODEL or --model");
            }
        }
        if b.timeout_secs == 0 {
            return invalid("backend.timeout_secs must be positive");
        }
        if b.max_in_flight == 0 {
            return invalid("backend.max_in_flight must be positive");
        }
        Ok(())
    }

    pub fn model_id(&self) -> String {
        match self.backend.kind {
            BackendKind::Scripted => SCRIPTED_MODEL.to_owned(),
            BackendKind::Openai => self.backend.model.clone(),
        }
    }

    pub fn batch(&self) -> BatchConfig {
        let s = &self.simulation;
        BatchConfig {
            dialogues_per_persona: s.dialogues_per_persona,
            recipients: s.recipients.clone(),
            dialogue: DialogueConfig {
                rounds: s.rounds,
                samples_per_questionnaire: s.samples,
                temperature: s.temperature,
                seed: s.seed,
                persuader_id: s.persuader.clone(),
                recipient_id: s.recipients[0].clone(),
                model_id: self.model_id(),
                schedule: s.schedule.clone(),
                max_tokens: s.max_tokens,
            },
            max_concurrent: s.concurrency,
        }
    }

    pub fn backend_config(&self) -> BackendConfig {
        let b = &self.backend;
        BackendConfig {
            endpoint: b.endpoint.clone(),
            model: b.model.clone(),
            auth_token: b.auth_token.clone(),
            timeout_secs: b.timeout_secs,
            max_retries: b.max_retries,
            backoff_ms: b.backoff_ms.clone(),
            max_in_flight: b.max_in_flight,
        }
    }
}
