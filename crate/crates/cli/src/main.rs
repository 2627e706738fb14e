//! `studentsim`: fixtures, ingestion, simulation, evaluation and reports.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 invalid input
//! data, 3 provider transport failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use studentsim::assessment::load_exam_bank;
use studentsim::engine::{
    self, emit_status_timelines, read_run_log, write_run_log, write_timelines_csv,
    write_transcript, ProviderKind, Services, SimConfig,
};
use studentsim::evaluation::{
    self, correlation_matrix, emit_eval_report, evaluate_run, load_ground_truth, AlignMode,
    CorrelationMode, EvalReport,
};
use studentsim::fixtures;
use studentsim::prompts::TemplateRegistry;
use studentsim::sensing::{self, load_zones, save_grids};
use studentsim::student::load_profiles;

mod exit;

use exit::{CliError, CliResult, Exit};

#[derive(Debug, Parser)]
#[command(name = "studentsim", version, about = "Sensing-grounded LLM student simulation")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Format of the run summary printed on stdout.
    #[arg(long, value_enum, default_value_t = SummaryFormat::Text, global = true)]
    summary_format: SummaryFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SummaryFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic cohort: profiles, zones, sensing logs, exam bank, ground truth, config.
    GenFixtures(GenFixturesArgs),
    /// Bucket sensing logs into weekly grid files.
    Ingest(IngestArgs),
    /// Run the weekly simulation and write the run log and transcript.
    Simulate(SimulateArgs),
    /// Score one or more run logs against ground-truth EMA.
    Evaluate(EvaluateArgs),
    /// Emit status timelines and score tables from a run log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenFixturesArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = fixtures::DEFAULT_COHORT)]
    students: usize,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Simulation config (for n_weeks).
    #[arg(long)]
    config: PathBuf,
    /// Profiles JSON (uids and term start dates).
    #[arg(long)]
    profiles: PathBuf,
    /// Location zone table (JSON).
    #[arg(long)]
    zones: PathBuf,
    /// Directory of `<uid>.csv` activity logs.
    #[arg(long)]
    activity_dir: PathBuf,
    /// Directory of `<uid>.csv` GPS logs.
    #[arg(long)]
    gps_dir: PathBuf,
    /// Output directory for grid files and `ingest_summary.json`.
    #[arg(long)]
    out: PathBuf,
    /// Rejected rows tolerated before failing.
    #[arg(long, default_value_t = 0)]
    max_rejects: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    /// Directory written by `ingest`.
    #[arg(long)]
    grids: PathBuf,
    #[arg(long)]
    exam_bank: PathBuf,
    /// Output directory for `run_log.json` and `transcript.jsonl`.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `mock`, or the name of a live provider profile in the config.
    #[arg(long)]
    provider: Option<String>,
    /// Template directory replacing the built-in prompts.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Run log to score, as `LABEL=PATH` or `PATH`. Repeat to compare runs.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    /// Ground truth CSV `uid,week,stress,sleep,social`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Config providing the EMA scales used to validate the truth file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Alignment::Cumulative)]
    alignment: Alignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Alignment {
    Cumulative,
    PerObservation,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    run_log: PathBuf,
    /// Output directory for `timelines.csv` and `scores.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Restrict timelines to these students.
    #[arg(long = "uid")]
    uids: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage } else { Exit::Ok }.into();
        }
    };
    init_logging(cli.verbose);
    let fmt = cli.summary_format;
    let result = match cli.command {
        Command::GenFixtures(a) => gen_fixtures(a),
        Command::Ingest(a) => ingest(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok((summary, code)) => {
            print_summary(&summary, fmt);
            code.into()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit.into()
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Ordered `(key, value)` pairs; rendered as `key: value` lines or one JSON object.
type Summary = Vec<(&'static str, serde_json::Value)>;

fn print_summary(summary: &Summary, fmt: SummaryFormat) {
    match fmt {
        SummaryFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                summary.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            println!("{}", serde_json::Value::Object(map));
        }
        SummaryFormat::Text => {
            for (k, v) in summary {
                match v {
                    serde_json::Value::String(s) => println!("{k}: {s}"),
                    other => println!("{k}: {other}"),
                }
            }
        }
    }
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} not found: {}", path.display())))
    }
}

fn path_str(p: &Path) -> serde_json::Value {
    json!(p.display().to_string())
}

fn gen_fixtures(a: GenFixturesArgs) -> CliResult<(Summary, Exit)> {
    if a.students == 0 || a.students > 99 {
        return Err(CliError::usage("--students must be between 1 and 99"));
    }
    let set = fixtures::generate(a.seed, a.students, &SimConfig::default());
    let paths = fixtures::write_fixtures(&a.out, &set)?;
    let samples: usize = set.sensing.iter().map(|(_, s)| s.len()).sum();
    Ok((
        vec![
            ("command", json!("gen-fixtures")),
            ("seed", json!(a.seed)),
            ("students", json!(set.profiles.len())),
            ("sensing_samples", json!(samples)),
            ("truth_records", json!(set.truth.len())),
            ("config", path_str(&paths.config)),
            ("out", path_str(&a.out)),
        ],
        Exit::Ok,
    ))
}

fn ingest(a: IngestArgs) -> CliResult<(Summary, Exit)> {
    for (p, what) in [
        (&a.config, "config"),
        (&a.profiles, "profiles"),
        (&a.zones, "zone table"),
        (&a.activity_dir, "activity directory"),
        (&a.gps_dir, "GPS directory"),
    ] {
        require(p, what)?;
    }
    let config = SimConfig::load(&a.config)?;
    let cohort = load_profiles(&a.profiles)?;
    let zones = load_zones(&a.zones)?;
    let mut summaries = Vec::with_capacity(cohort.len());
    let mut empty = Vec::new();
    for p in &cohort {
        let file = |dir: &Path| Some(dir.join(format!("{}.csv", p.uid))).filter(|f| f.exists());
        let (act, gps) = (file(&a.activity_dir), file(&a.gps_dir));
        let (grids, summary) = sensing::ingest_student(
            &p.uid,
            act.as_deref(),
            gps.as_deref(),
            &zones,
            p.term_start,
            config.n_weeks,
        )?;
        if summary.in_window == 0 {
            tracing::warn!(uid = %p.uid, "no sensing samples in the term window; grids are empty");
            empty.push(p.uid.clone());
        }
        save_grids(&a.out, &grids)?;
        summaries.push(summary);
    }
    let rejects: Vec<_> = summaries.iter().flat_map(|s| &s.rejects).collect();
    for (file, line, reason) in &rejects {
        eprintln!("rejected {file}:{line}: {reason}");
    }
    let mut json_summary = serde_json::to_string_pretty(&summaries).expect("summary serializes");
    json_summary.push('\n');
    std::fs::write(a.out.join("ingest_summary.json"), json_summary)?;

    let total = |f: fn(&sensing::IngestSummary) -> u64| summaries.iter().map(f).sum::<u64>();
    let summary = vec![
        ("command", json!("ingest")),
        ("students", json!(cohort.len())),
        ("weeks", json!(config.n_weeks)),
        ("in_window", json!(total(|s| s.in_window))),
        ("discarded", json!(total(|s| s.discarded))),
        ("duplicates", json!(total(|s| s.duplicates))),
        ("rejects", json!(rejects.len())),
        ("empty_students", json!(empty)),
        ("out", path_str(&a.out)),
    ];
    if rejects.len() > a.max_rejects {
        eprintln!(
            "error: {} rejected rows (limit {}); grids were written from the valid rows",
            rejects.len(),
            a.max_rejects
        );
        return Ok((summary, Exit::Data));
    }
    Ok((summary, Exit::Ok))
}

fn simulate(a: SimulateArgs) -> CliResult<(Summary, Exit)> {
    for (p, what) in [
        (&a.config, "config"),
        (&a.profiles, "profiles"),
        (&a.grids, "grid directory"),
        (&a.exam_bank, "exam bank"),
    ] {
        require(p, what)?;
    }
    let mut config = SimConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    match a.provider.as_deref() {
        None => {}
        Some("mock") => config.provider.kind = ProviderKind::Mock,
        Some(name) => {
            config.provider.kind = ProviderKind::Live;
            config.provider.profile = Some(name.to_string());
        }
    }
    config.validate()?;
    config.sync_model_id();
    let registry = match &a.templates {
        Some(dir) => TemplateRegistry::load_dir(dir)?,
        None => TemplateRegistry::builtin(),
    };
    let cohort = load_profiles(&a.profiles)?;
    let bank = load_exam_bank(&a.exam_bank)?;
    let grids = sensing::load_grids(&a.grids)?;
    let provider = engine::build_provider(&config, &bank)?;
    let services = Services::new(provider.as_ref(), &registry, &bank, &config)?;
    let output = engine::run_simulation(&cohort, &grids, &services)?;

    std::fs::create_dir_all(&a.out)?;
    let log_path = a.out.join("run_log.json");
    let transcript_path = a.out.join("transcript.jsonl");
    write_run_log(&log_path, &output.run_log)?;
    write_transcript(&transcript_path, &output.transcript)?;

    let log = &output.run_log;
    let weeks = log.outcomes().count();
    let failed: usize = log.students.iter().map(|s| s.failed_weeks.len()).sum();
    let exams = log.outcomes().filter(|o| o.exam.is_some()).count();
    let projects = log.outcomes().filter(|o| o.project.is_some()).count();
    let summary = vec![
        ("command", json!("simulate")),
        ("provider", json!(log.meta.provider)),
        ("seed", json!(log.meta.seed)),
        ("students", json!(log.students.len())),
        ("week_outcomes", json!(weeks)),
        ("exam_results", json!(exams)),
        ("project_results", json!(projects)),
        ("failed_weeks", json!(failed)),
        ("run_log", path_str(&log_path)),
        ("transcript", path_str(&transcript_path)),
    ];
    let all_failed = weeks > 0
        && failed == weeks
        && output.transcript.iter().all(|r| r.response_text.is_none());
    if all_failed {
        eprintln!("error: every provider request failed; see the transcript for details");
        return Ok((summary, Exit::Transport));
    }
    Ok((summary, Exit::Ok))
}

fn parse_run_arg(s: &str) -> (String, PathBuf) {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(s);
            let label = p
                .parent()
                .and_then(|d| d.file_name())
                .map_or_else(|| s.to_string(), |n| n.to_string_lossy().into_owned());
            (label, p)
        }
    }
}

fn evaluate(a: EvaluateArgs) -> CliResult<(Summary, Exit)> {
    require(&a.truth, "ground truth")?;
    let scales = match &a.config {
        Some(c) => {
            require(c, "config")?;
            Some(SimConfig::load(c)?.ema_scales)
        }
        None => None,
    };
    let truth = load_ground_truth(&a.truth, scales.as_ref())?;
    let mode = match a.alignment {
        Alignment::Cumulative => AlignMode::Cumulative,
        Alignment::PerObservation => AlignMode::PerObservation,
    };
    let mut runs = Vec::new();
    let mut correlations = Vec::new();
    let mut echo = BTreeMap::new();
    let mut unmatched = Vec::new();
    for arg in &a.runs {
        let (label, path) = parse_run_arg(arg);
        require(&path, "run log")?;
        let log = read_run_log(&path)?;
        let (metrics, alignment) = evaluate_run(&label, &log, &truth, mode)?;
        for (dim, n) in &metrics.excluded {
            eprintln!("{label}: {n} student(s) excluded from {dim} (no ground truth)");
        }
        unmatched.extend(alignment.unmatched_truth.iter().cloned());
        echo.insert(format!("{label}.run_log"), path.display().to_string());
        echo.insert(format!("{label}.config_hash"), log.meta.config_hash.clone());
        echo.insert(format!("{label}.provider"), log.meta.provider.clone());
        correlations.push(evaluation::report::RunCorrelations {
            label: label.clone(),
            matrices: CorrelationMode::ALL
                .iter()
                .filter_map(|m| correlation_matrix(&log, *m))
                .collect(),
        });
        runs.push(metrics);
    }
    echo.insert("truth".into(), a.truth.display().to_string());
    let report = EvalReport {
        alignment: mode,
        alignment_note: mode.describe().to_string(),
        runs,
        correlations,
        config: echo,
    };
    let paths = emit_eval_report(&report, &a.out)?;
    unmatched.sort();
    unmatched.dedup();
    let metrics: BTreeMap<&str, serde_json::Value> = report
        .runs
        .iter()
        .map(|r| (r.label.as_str(), json!({"dims": r.dims, "excluded": r.excluded})))
        .collect();
    Ok((
        vec![
            ("command", json!("evaluate")),
            ("alignment", json!(mode)),
            ("runs", json!(report.runs.len())),
            ("metrics", json!(metrics)),
            ("unmatched_truth_students", json!(unmatched)),
            ("report", path_str(&paths.table)),
            ("spearman", path_str(&paths.spearman)),
            ("summary", path_str(&paths.summary)),
        ],
        Exit::Ok,
    ))
}

fn report(a: ReportArgs) -> CliResult<(Summary, Exit)> {
    require(&a.run_log, "run log")?;
    let log = read_run_log(&a.run_log)?;
    let uids = (!a.uids.is_empty()).then_some(a.uids.as_slice());
    let rows = emit_status_timelines(&log, uids)?;
    std::fs::create_dir_all(&a.out)?;
    let timelines = a.out.join("timelines.csv");
    write_timelines_csv(std::fs::File::create(&timelines)?, &rows)?;

    let scores = a.out.join("scores.csv");
    let mut csv = String::from("uid");
    for w in &log.meta.exam_weeks {
        csv.push_str(&format!(",exam_week{w}"));
    }
    csv.push_str(",project,cumulative,failed_weeks\n");
    for s in &log.students {
        csv.push_str(&s.uid);
        for w in &log.meta.exam_weeks {
            let score = s
                .outcomes
                .iter()
                .find(|o| o.week == *w)
                .and_then(|o| o.exam.as_ref())
                .map_or_else(String::new, |e| e.score.to_string());
            csv.push_str(&format!(",{score}"));
        }
        let project = s
            .outcomes
            .iter()
            .find_map(|o| o.project.as_ref())
            .and_then(|p| p.score)
            .map_or_else(String::new, |v| v.to_string());
        csv.push_str(&format!(
            ",{project},{},{}\n",
            s.cumulative_score,
            s.failed_weeks.len()
        ));
    }
    std::fs::write(&scores, csv)?;

    let cumulative: Vec<u32> = log.students.iter().map(|s| s.cumulative_score).collect();
    let mean = cumulative.iter().sum::<u32>() as f64 / cumulative.len().max(1) as f64;
    Ok((
        vec![
            ("command", json!("report")),
            ("students", json!(log.students.len())),
            ("timeline_rows", json!(rows.len())),
            ("mean_cumulative_score", json!((mean * 100.0).round() / 100.0)),
            ("timelines", path_str(&timelines)),
            ("scores", path_str(&scores)),
        ],
        Exit::Ok,
    ))
}
