//! `orgminer`: command-line front end for the workflow organization miner.
//!
//! Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 validation
//! failure. Reports are line-delimited JSON records with stable key order;
//! `--pretty` switches to human-readable tables. No subcommand mutates its
//! input files, and every artifact is written in one shot only after the
//! whole run succeeded.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use orgminer_core::generator::{generate, GeneratorConfig};
use orgminer_core::io::filter::{filter_log, FilterSpec};
use orgminer_core::io::{convert, parse_log, serialize_log, LogFormat};
use orgminer_core::model::{validate_log, WorkflowLog};
use orgminer_core::orgstruct::{
    build_interaction_graph, mine_structures, mine_structures_per_process, structure_dot,
    StructureReport, StructureThresholds,
};
use orgminer_core::protocol::{load_templates, mine_protocols};
use orgminer_core::{export_agr_dot, mine_documents, perf_report};

#[derive(Parser)]
#[command(
    name = "orgminer",
    version,
    about = "Mines interaction protocols, organizational structures, document flow \
             and performance statistics from performative-extended workflow logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Flat,
    Tree,
}

impl From<Format> for LogFormat {
    fn from(f: Format) -> LogFormat {
        match f {
            Format::Flat => LogFormat::Flat,
            Format::Tree => LogFormat::Tree,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic log from a JSON ground-truth config
    Generate {
        /// Generator config file (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output log format (default: from --out extension, else flat)
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert a log between the flat and tree formats
    Convert {
        /// Input log path
        #[arg(long = "in")]
        input: PathBuf,
        /// Input format (default: from extension)
        #[arg(long, value_enum)]
        in_format: Option<Format>,
        /// Output log path
        #[arg(long)]
        out: PathBuf,
        /// Output format (default: from extension)
        #[arg(long, value_enum)]
        out_format: Option<Format>,
    },
    /// Apply a filter spec to a log
    Filter {
        #[arg(long)]
        log: PathBuf,
        /// Filter spec file (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output log format (default: same as input)
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Check a log against the meta-model invariants
    Validate {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Discover interaction protocol instances per conversation
    MineProtocols {
        #[arg(long)]
        log: PathBuf,
        /// Directory of extra protocol template files (JSON)
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Report path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Human-readable tables instead of JSON records
        #[arg(long)]
        pretty: bool,
    },
    /// Classify connected components of the interaction graph
    MineOrgstruct {
        #[arg(long)]
        log: PathBuf,
        /// Classify each process separately
        #[arg(long)]
        per_process: bool,
        /// Thresholds file (JSON)
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Report path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the interaction graph as DOT
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Report document flow per activity and per document
    MineInfo {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Report waiting/processing/flow times and outcome counts
    Stats {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Export the agent/group/role graph as DOT
    Agr {
        #[arg(long)]
        log: PathBuf,
        /// DOT output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print general data about a log
    Summary {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        pretty: bool,
    },
}

/// Failures mapped onto the exit-code contract (input/parse = 2,
/// validation = 3). Usage errors are clap's and exit 1.
enum CliError {
    Input(String),
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Validation(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_log(path: &Path, format: Option<Format>) -> Result<WorkflowLog, CliError> {
    let format = format.map_or_else(|| LogFormat::from_path(path), LogFormat::from);
    let text = read_file(path)?;
    parse_log(&text, format).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes to the path, or stdout when none. Output is assembled fully
/// before anything is written.
fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// One line-delimited report record: a kind tag plus the payload.
#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    record: &'a str,
    data: &'a T,
}

fn record<T: Serialize>(kind: &str, data: &T) -> String {
    let mut line = serde_json::to_string(&Record { record: kind, data }).expect("report record");
    line.push('\n');
    line
}

#[derive(Serialize)]
struct Summary {
    processes: usize,
    cases: usize,
    events: usize,
    actors: usize,
    performatives: usize,
    activities: usize,
    roles: usize,
    org_units: usize,
    documents: usize,
}

impl Summary {
    fn of(log: &WorkflowLog) -> Summary {
        let mut performatives = BTreeSet::new();
        let mut activities = BTreeSet::new();
        for (_, e) in log.events() {
            performatives.insert(e.performative.clone());
            activities.insert(e.activity.clone());
        }
        Summary {
            processes: log.processes.len(),
            cases: log.case_count(),
            events: log.event_count(),
            actors: log.actors.len(),
            performatives: performatives.len(),
            activities: activities.len(),
            roles: log.roles.len(),
            org_units: log.org_units.len(),
            documents: log.documents.len(),
        }
    }
}

fn structure_report_lines(name: Option<&str>, report: &StructureReport, pretty: bool) -> String {
    let mut out = String::new();
    let scope = name.unwrap_or("all processes");
    if pretty {
        out.push_str(&format!(
            "{scope}: {} actors, {} distinct edges, {} interaction events, {} component(s)\n",
            report.stats.nodes,
            report.stats.distinct_edges,
            report.stats.interaction_events,
            report.stats.components
        ));
        for v in &report.verdicts {
            let members: Vec<&str> = v.component.iter().map(String::as_str).collect();
            out.push_str(&format!("  {:<18} {{{}}}\n", v.label.as_str(), members.join(", ")));
        }
    } else {
        #[derive(Serialize)]
        struct Scoped<'a, T: Serialize> {
            scope: &'a str,
            #[serde(flatten)]
            data: &'a T,
        }
        out.push_str(&record("structure-stats", &Scoped { scope, data: &report.stats }));
        for v in &report.verdicts {
            out.push_str(&record("structure-verdict", &Scoped { scope, data: v }));
        }
    }
    out
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out, format, seed } => {
            let text = read_file(&config)?;
            let mut cfg: GeneratorConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", config.display())))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let log = generate(&cfg).map_err(input_err)?;
            let format = format.map(LogFormat::from).unwrap_or_else(|| {
                out.as_deref().map_or(LogFormat::Flat, LogFormat::from_path)
            });
            emit(out.as_deref(), &serialize_log(&log, format))
        }
        Command::Convert { input, in_format, out, out_format } => {
            let in_format = in_format.map_or_else(|| LogFormat::from_path(&input), LogFormat::from);
            let out_format = out_format.map_or_else(|| LogFormat::from_path(&out), LogFormat::from);
            let summary = convert(&input, in_format, &out, out_format).map_err(input_err)?;
            print!("{}", record("conversion-summary", &summary));
            Ok(())
        }
        Command::Filter { log, spec, out, format } => {
            let format = format.map_or_else(|| LogFormat::from_path(&log), LogFormat::from);
            let parsed = read_log(&log, None)?;
            let spec_text = read_file(&spec)?;
            let spec: FilterSpec = serde_json::from_str(&spec_text)
                .map_err(|e| CliError::Input(format!("filter spec: {e}")))?;
            let filtered = filter_log(&parsed, &spec);
            emit(out.as_deref(), &serialize_log(&filtered, format))
        }
        Command::Validate { log, format } => {
            let parsed = read_log(&log, format)?;
            let report = validate_log(&parsed);
            let mut out = String::new();
            for v in &report.violations {
                out.push_str(&record("violation", v));
            }
            print!("{out}");
            if report.has_errors() {
                let errors = report
                    .violations
                    .iter()
                    .filter(|v| v.severity == orgminer_core::model::Severity::Error)
                    .count();
                return Err(CliError::Validation(format!("{errors} error(s) found")));
            }
            Ok(())
        }
        Command::MineProtocols { log, templates, out, pretty } => {
            let parsed = read_log(&log, None)?;
            let mut paths: Vec<PathBuf> = Vec::new();
            if let Some(dir) = templates {
                let entries = fs::read_dir(&dir)
                    .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
                for entry in entries {
                    let path = entry
                        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
                        .path();
                    if path.extension().is_some_and(|e| e == "json") {
                        paths.push(path);
                    }
                }
                paths.sort();
            }
            let templates = load_templates(&paths).map_err(input_err)?;
            let report = mine_protocols(&parsed, &templates);
            let mut text = String::new();
            if pretty {
                text.push_str(&format!(
                    "{} conversation(s): {} matched, {} unmatched\n",
                    report.conversations,
                    report.instances.len(),
                    report.unmatched_conversations.len()
                ));
                for i in &report.instances {
                    text.push_str(&format!(
                        "  {:<16} {:<8} case {} activity {:<28} initiator {:<10} events {} (seq {}..{})\n",
                        i.template,
                        match i.outcome {
                            orgminer_core::protocol::Outcome::Complete => "complete",
                            orgminer_core::protocol::Outcome::Partial => "partial",
                        },
                        i.case_id,
                        i.activity,
                        i.initiator,
                        i.events_consumed,
                        i.event_span.0,
                        i.event_span.1
                    ));
                }
                for u in &report.unmatched_conversations {
                    text.push_str(&format!(
                        "  unmatched         case {} activity {:<28} initiator {:<10} ({})\n",
                        u.case_id, u.activity, u.initiator, u.diagnostics
                    ));
                }
            } else {
                #[derive(Serialize)]
                struct Totals<'a> {
                    conversations: usize,
                    per_template: &'a std::collections::BTreeMap<
                        String,
                        orgminer_core::protocol::TemplateCount,
                    >,
                }
                text.push_str(&record(
                    "protocol-summary",
                    &Totals { conversations: report.conversations, per_template: &report.per_template },
                ));
                for i in &report.instances {
                    text.push_str(&record("protocol-instance", i));
                }
                for u in &report.unmatched_conversations {
                    text.push_str(&record("unmatched-conversation", u));
                }
            }
            emit(out.as_deref(), &text)
        }
        Command::MineOrgstruct { log, per_process, thresholds, out, dot, pretty } => {
            let parsed = read_log(&log, None)?;
            let thresholds = match thresholds {
                Some(path) => serde_json::from_str(&read_file(&path)?)
                    .map_err(|e| CliError::Input(format!("thresholds: {e}")))?,
                None => StructureThresholds::default(),
            };
            let mut text = String::new();
            let whole = mine_structures(&parsed, &thresholds);
            if per_process {
                for (name, report) in mine_structures_per_process(&parsed, &thresholds) {
                    text.push_str(&structure_report_lines(Some(&name), &report, pretty));
                }
            } else {
                text.push_str(&structure_report_lines(None, &whole, pretty));
            }
            if let Some(dot_path) = dot {
                let graph = build_interaction_graph(&parsed);
                emit(Some(&dot_path), &structure_dot(&graph, &whole))?;
            }
            emit(out.as_deref(), &text)
        }
        Command::MineInfo { log, out, pretty } => {
            let parsed = read_log(&log, None)?;
            let report = mine_documents(&parsed);
            let mut text = String::new();
            if pretty {
                for (activity, docs) in &report.per_activity {
                    let consumed: Vec<&str> = docs.consumed.iter().map(String::as_str).collect();
                    let produced: Vec<&str> = docs.produced.iter().map(String::as_str).collect();
                    text.push_str(&format!(
                        "{activity}: consumes [{}], produces [{}] ({} event(s))\n",
                        consumed.join(", "),
                        produced.join(", "),
                        docs.occurrences
                    ));
                }
                if report.per_activity.is_empty() {
                    text.push_str("no document usage recorded\n");
                }
            } else {
                #[derive(Serialize)]
                struct Named<'a, T: Serialize> {
                    name: &'a str,
                    #[serde(flatten)]
                    data: &'a T,
                }
                for (activity, docs) in &report.per_activity {
                    text.push_str(&record("activity-documents", &Named { name: activity, data: docs }));
                }
                for (doc, usage) in &report.per_document {
                    text.push_str(&record("document-usage", &Named { name: doc, data: usage }));
                }
            }
            emit(out.as_deref(), &text)
        }
        Command::Stats { log, out, pretty } => {
            let parsed = read_log(&log, None)?;
            let protocols = mine_protocols(&parsed, &load_templates(&[] as &[&Path]).map_err(input_err)?);
            let report = perf_report(&parsed, &protocols);
            let mut text = String::new();
            if pretty {
                text.push_str("activity                     n  timed  mean[s]    min[s]    max[s]\n");
                for (activity, s) in &report.per_activity {
                    text.push_str(&format!(
                        "{:<26} {:>4} {:>6} {:>8} {:>9} {:>9}\n",
                        activity,
                        s.occurrences,
                        s.timed_occurrences,
                        s.mean_processing_secs.map_or("-".to_string(), |m| format!("{m:.1}")),
                        s.min_processing_secs.map_or("-".to_string(), |m| m.to_string()),
                        s.max_processing_secs.map_or("-".to_string(), |m| m.to_string()),
                    ));
                }
                text.push_str("\nactor            completed  suspended  aborted\n");
                for (actor, s) in &report.per_actor {
                    text.push_str(&format!(
                        "{:<16} {:>9} {:>10} {:>8}\n",
                        actor, s.completed, s.suspended, s.aborted
                    ));
                }
                if !report.contingency.is_empty() {
                    text.push_str("\nprotocol x terminal state\n");
                    for (template, row) in &report.contingency {
                        for (state, n) in row {
                            text.push_str(&format!("  {template:<16} {state:<10} {n}\n"));
                        }
                    }
                }
            } else {
                #[derive(Serialize)]
                struct Named<'a, T: Serialize> {
                    name: &'a str,
                    #[serde(flatten)]
                    data: &'a T,
                }
                for (activity, s) in &report.per_activity {
                    text.push_str(&record("activity-stats", &Named { name: activity, data: s }));
                }
                for (a, s) in &report.per_actor {
                    text.push_str(&record("actor-stats", &Named { name: a, data: s }));
                }
                text.push_str(&record("contingency", &report.contingency));
            }
            emit(out.as_deref(), &text)
        }
        Command::Agr { log, out } => {
            let parsed = read_log(&log, None)?;
            let structures = mine_structures(&parsed, &StructureThresholds::default());
            emit(out.as_deref(), &export_agr_dot(&parsed, &structures))
        }
        Command::Summary { log, pretty } => {
            let parsed = read_log(&log, None)?;
            let summary = Summary::of(&parsed);
            if pretty {
                print!(
                    "processes:     {}\ncases:         {}\nevents:        {}\nactors:        {} (+system)\n\
                     performatives: {}\nactivities:    {}\nroles:         {}\norg units:     {}\ndocuments:     {}\n",
                    summary.processes,
                    summary.cases,
                    summary.events,
                    summary.actors,
                    summary.performatives,
                    summary.activities,
                    summary.roles,
                    summary.org_units,
                    summary.documents
                );
            } else {
                print!("{}", record("summary", &summary));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("orgminer: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
