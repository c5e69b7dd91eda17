mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use dialogsim::engine::{batch_manifest, BatchConfig, Simulation};
use dialogsim::gateway::openai::OpenAiBackend;
use dialogsim::gateway::scripted::{ScriptedBackend, ScriptedProfiles};
use dialogsim::gateway::{ChatBackend, Gateway};
use dialogsim::instrument::{builtin_instrument, Instrument};
use dialogsim::persona::{builtin_personas, PersonaSpec};
use dialogsim::psychometrics::export::figure_tables;
use dialogsim::psychometrics::{analyze, AdministrationFilter, AnalysisOptions, AnalysisReport, BaselineRound, BaselineTable};
use dialogsim::store::{export_csv, load_run, ExportTable, LoadedRun, RunStore};

use config::{BackendKind, Config, Overrides};

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_ANALYSIS: u8 = 3;

#[derive(Parser)]
#[command(name = "dialogsim", version, about = "Simulate persuasive dialogues between LLM agents and analyze the questionnaire data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of dialogues into a run directory.
    Simulate {
        #[command(flatten)]
        flags: Overrides,
        /// Continue an interrupted run in this directory; its stored config is used.
        #[arg(long, conflicts_with = "out")]
        resume: Option<PathBuf>,
    },
    /// Reliability, correlations, descriptives and trajectory of a run.
    Analyze {
        run: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write plot-ready CSV tables for a run.
    Report {
        run: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        /// Output directory (default: <run>/report).
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Export raw run tables as CSV.
    Export {
        run: PathBuf,
        /// administrations, construct_scores or trajectory
        #[arg(long)]
        table: String,
        /// Output file (default: stdout).
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Check a configuration without contacting any endpoint.
    Validate {
        #[command(flatten)]
        flags: Overrides,
    },
    /// Print the structured-output schema for a set of constructs.
    Schema {
        /// Construct ids, comma separated (default: all).
        #[arg(long, value_delimiter = ',')]
        constructs: Vec<String>,
        /// Print the bare JSON Schema instead of the response_format parameter.
        #[arg(long)]
        json_schema: bool,
        /// Instrument TOML replacing the built-in battery.
        #[arg(long)]
        instrument: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct FilterArgs {
    #[arg(long = "persona")]
    personas: Vec<String>,
    #[arg(long = "round")]
    rounds: Vec<u32>,
    #[arg(long = "model")]
    models: Vec<String>,
    /// Round compared against human means: final, all, or a round number.
    #[arg(long, default_value = "final", value_parser = parse_baseline_round)]
    baseline_round: BaselineRound,
    /// Add single-item constructs to the correlation matrix.
    #[arg(long)]
    include_single_items: bool,
    /// Restrict a construct to some of its items, e.g. subjective_norms=norms_friends,norms_family
    #[arg(long = "subset", value_parser = parse_subset)]
    subsets: Vec<(String, Vec<String>)>,
}

fn parse_baseline_round(s: &str) -> Result<BaselineRound, String> {
    match s {
        "final" => Ok(BaselineRound::Final),
        "all" => Ok(BaselineRound::All),
        n => n
            .parse()
            .map(BaselineRound::Round)
            .map_err(|_| format!("expected final, all or a round number, got `{n}`")),
    }
}

fn parse_subset(s: &str) -> Result<(String, Vec<String>), String> {
    let (construct, items) = s.split_once('=').ok_or("expected construct=item,item")?;
    Ok((construct.to_owned(), items.split(',').map(str::to_owned).collect()))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn analysis(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_ANALYSIS,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate { flags, resume } => simulate(&flags, resume.as_deref()),
        Command::Analyze { run, filter, json } => analyze_cmd(&run, &filter, json),
        Command::Report { run, filter, out } => report_cmd(&run, &filter, out),
        Command::Export { run, table, out } => export_cmd(&run, &table, out),
        Command::Validate { flags } => validate_cmd(&flags),
        Command::Schema {
            constructs,
            json_schema,
            instrument,
        } => schema_cmd(&constructs, json_schema, instrument.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok()
}

fn load_instrument(path: Option<&Path>) -> Result<Instrument, Failure> {
    match path {
        None => Ok(builtin_instrument()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            Instrument::from_toml(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
        }
    }
}

fn load_personas(paths: &[PathBuf]) -> Result<Vec<PersonaSpec>, Failure> {
    let mut personas: Vec<PersonaSpec> = builtin_personas().all().into_iter().cloned().collect();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
        let persona = PersonaSpec::from_toml(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
        personas.retain(|q| q.id != persona.id);
        personas.push(persona);
    }
    Ok(personas)
}

/// Everything checked before any side effect.
struct Prepared {
    config: Config,
    instrument: Instrument,
    personas: Vec<PersonaSpec>,
    batch: BatchConfig,
}

fn prepare(config: Config) -> Result<Prepared, Failure> {
    let instrument = load_instrument(config.inputs.instrument.as_deref())?;
    let personas = load_personas(&config.inputs.personas)?;
    let batch = config.batch();
    batch.validate().map_err(Failure::config)?;
    batch.dialogue.schedule.validate(&instrument).map_err(Failure::config)?;
    let find = |id: &str| personas.iter().find(|p| p.id == id);
    for id in std::iter::once(&batch.dialogue.persuader_id).chain(&batch.recipients) {
        if find(id).is_none() {
            return Err(Failure::config(format!("unknown persona `{id}`")));
        }
    }
    Ok(Prepared {
        config,
        instrument,
        personas,
        batch,
    })
}

fn backend(p: &Prepared) -> Result<Arc<dyn ChatBackend>, Failure> {
    Ok(match p.config.backend.kind {
        BackendKind::Scripted => {
            let mut profiles = ScriptedProfiles::builtin();
            for persona in profiles.personas.values_mut() {
                persona.retain(|construct, _| p.instrument.construct(construct).is_some());
            }
            Arc::new(
                ScriptedBackend::new(config::SCRIPTED_MODEL, p.instrument.clone(), profiles).map_err(Failure::config)?,
            )
        }
        BackendKind::Openai => Arc::new(OpenAiBackend::new(&p.config.backend_config())),
    })
}

fn simulate(flags: &Overrides, resume: Option<&Path>) -> Result<u8, Failure> {
    let (prepared, store) = match resume {
        Some(dir) => {
            let store = RunStore::open(dir).map_err(Failure::config)?;
            let mut config: Config = serde_json::from_value(store.manifest().config)
                .map_err(|e| Failure::config(format!("stored config unreadable: {e}")))?;
            config.backend.auth_token = env_var(config::ENV_API_KEY).filter(|t| !t.is_empty());
            if let Some(c) = flags.concurrency {
                config.simulation.concurrency = c;
            }
            config.validate().map_err(Failure::config)?;
            (prepare(config)?, store)
        }
        None => {
            let config = Config::resolve(flags, env_var).map_err(Failure::config)?;
            let prepared = prepare(config)?;
            let dir = prepared.config.output.dir.clone().unwrap_or_else(|| {
                PathBuf::from("runs").join(chrono::Utc::now().format("run-%Y%m%d-%H%M%S").to_string())
            });
            let mut effective = prepared.config.clone();
            effective.output.dir = Some(dir.clone());
            let run_id = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".to_owned());
            let config_json = serde_json::to_value(&effective).expect("config serializes");
            let manifest = batch_manifest(&run_id, &prepared.batch, config_json);
            let store = RunStore::create(&dir, manifest).map_err(Failure::config)?;
            (Prepared { config: effective, ..prepared }, store)
        }
    };

    let backend = backend(&prepared)?;
    let b = &prepared.config.backend;
    let mut gateway = Gateway::new(
        backend,
        prepared.config.backend_config().retry_policy(b.max_reasks),
        b.max_in_flight,
    );
    if prepared.config.output.audit {
        gateway = gateway.with_audit(store.audit_log());
    }
    let sim = Simulation::new(prepared.instrument.clone(), prepared.personas.clone(), gateway);
    eprintln!(
        "simulating {} dialogues ({} per persona, {} rounds, {} samples) into {}",
        prepared.batch.dialogues_per_persona as usize * prepared.batch.recipients.len(),
        prepared.batch.dialogues_per_persona,
        prepared.batch.dialogue.rounds,
        prepared.batch.dialogue.samples_per_questionnaire,
        store.dir().display()
    );
    let summary = sim.run_batch(&prepared.batch, &store).map_err(Failure::config)?;
    for (id, message) in &summary.failures {
        eprintln!("failed: {id}: {message}");
    }
    let fingerprint = load_run(store.dir()).map(|r| r.fingerprint()).unwrap_or_default();
    println!(
        "run {}: {} completed, {} failed, {} skipped; fingerprint {fingerprint}",
        summary.run_id, summary.completed, summary.failed, summary.skipped
    );
    println!("{}", store.dir().display());
    Ok(if summary.failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn run_instrument(run: &LoadedRun) -> Result<Instrument, Failure> {
    let path = run
        .manifest
        .config
        .pointer("/inputs/instrument")
        .and_then(|v| v.as_str())
        .map(PathBuf::from);
    load_instrument(path.as_deref()).map_err(|f| Failure::analysis(f.message))
}

fn run_report(dir: &Path, filter: &FilterArgs) -> Result<(AnalysisReport, BaselineTable), Failure> {
    let run = load_run(dir).map_err(Failure::analysis)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let instrument = run_instrument(&run)?;
    let set = run.response_set(&instrument).map_err(Failure::analysis)?;
    let options = AnalysisOptions {
        filter: AdministrationFilter {
            personas: filter.personas.clone(),
            rounds: filter.rounds.clone(),
            models: filter.models.clone(),
        },
        baseline_round: filter.baseline_round,
        item_subsets: filter.subsets.iter().cloned().collect(),
        include_single_items: filter.include_single_items,
        rounds: run
            .manifest
            .config
            .pointer("/simulation/rounds")
            .and_then(|v| v.as_u64())
            .map(|r| r as u32)
            .filter(|_| filter.rounds.is_empty()),
        ..AnalysisOptions::default()
    };
    let baselines = BaselineTable::builtin();
    let report = analyze(&set, &baselines, &options).map_err(Failure::analysis)?;
    Ok((report, baselines))
}

fn analyze_cmd(dir: &Path, filter: &FilterArgs, json: bool) -> Result<u8, Failure> {
    let (report, _) = run_report(dir, filter)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.to_text());
    }
    Ok(0)
}

fn report_cmd(dir: &Path, filter: &FilterArgs, out: Option<PathBuf>) -> Result<u8, Failure> {
    let (report, baselines) = run_report(dir, filter)?;
    let out = out.unwrap_or_else(|| dir.join("report"));
    fs::create_dir_all(&out).map_err(|e| Failure::analysis(format!("{}: {e}", out.display())))?;
    for (name, bytes) in figure_tables(&report, &baselines).map_err(Failure::analysis)? {
        let path = out.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::analysis(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(0)
}

fn export_cmd(dir: &Path, table: &str, out: Option<PathBuf>) -> Result<u8, Failure> {
    let table: ExportTable = table.parse().map_err(Failure::config)?;
    let run = load_run(dir).map_err(Failure::analysis)?;
    let instrument = run_instrument(&run)?;
    match out {
        Some(path) => {
            let file = fs::File::create(&path).map_err(|e| Failure::analysis(format!("{}: {e}", path.display())))?;
            export_csv(&run, table, &instrument, file).map_err(Failure::analysis)?;
        }
        None => export_csv(&run, table, &instrument, std::io::stdout().lock()).map_err(Failure::analysis)?,
    }
    Ok(0)
}

fn validate_cmd(flags: &Overrides) -> Result<u8, Failure> {
    let config = Config::resolve(flags, env_var).map_err(Failure::config)?;
    let prepared = prepare(config)?;
    if prepared.config.backend.kind == BackendKind::Scripted {
        backend(&prepared)?;
    }
    print!("{}", prepared.config.to_toml());
    eprintln!(
        "ok: {} constructs, {} items, {} personas, {} conversations",
        prepared.instrument.constructs().len(),
        prepared.instrument.item_count(),
        prepared.personas.len(),
        prepared.batch.dialogues_per_persona as usize * prepared.batch.recipients.len()
    );
    Ok(0)
}

fn schema_cmd(constructs: &[String], json_schema: bool, instrument: Option<&Path>) -> Result<u8, Failure> {
    let instrument = load_instrument(instrument)?;
    let ids: Vec<String> = if constructs.is_empty() {
        instrument.constructs().iter().map(|c| c.id.clone()).collect()
    } else {
        constructs.to_vec()
    };
    let schema = instrument.response_schema(&ids).map_err(Failure::config)?;
    let value = if json_schema {
        schema.to_json_schema()
    } else {
        schema.to_response_format()
    };
    println!("{}", serde_json::to_string_pretty(&value).expect("schema serializes"));
    Ok(0)
}
