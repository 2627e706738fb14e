//! The weekly simulation loop.
//!
//! Each student runs weeks `1..=n_weeks` in order. A week asks the student
//! agent for a journal, has the judge turn it into a new status, derives the
//! EMA answers, runs any scheduled exam or project, and writes the summary
//! the agent sees next week. Students are independent and run on a small
//! worker pool; results are assembled in cohort order afterwards.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{
    administer_exam, cumulative_score, judge_project, AssessmentError, ExamBank, ExamResult,
    ExamSchedule, ProjectResult, EXAM_MAX_TOTAL, STATED_EXAM_MAX,
};
use crate::gateway::mock::EXAM_WEEK_MARKER;
use crate::gateway::{
    parse_status_payload, ChatProvider, ExamPolicy, GatewayError, JudgeAssessment,
    LiveProvider, MockProvider, Role, Session, TranscriptRecord,
};
use crate::prompts::{PromptError, RenderContext, TemplateId, TemplateRegistry};
use crate::sensing::{render_weekly_report, WeekGrid};
use crate::student::{default_status, validate_cohort, StatusVector, StudentProfile};

pub mod config;
pub mod runlog;

pub use config::{EmaScale, EmaScales, MockExamPolicy, ProviderKind, ProviderSettings, SimConfig};
pub use runlog::{
    emit_status_timelines, read_run_log, write_run_log, write_timelines_csv, write_transcript,
    RunLog, RunMeta, StudentRun, TimelineRow, SCHEMA_VERSION,
};

/// Summary shown to the agent before any week has been completed.
pub const FIRST_WEEK_SUMMARY: &str = "This is the first week of term. No class experience yet.";
const EMPTY_REPORT: &str = "(no sensing data recorded this week)";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown student `{0}`")]
    UnknownStudent(String),
    #[error("io: {0}")]
    Io(String),
    #[error("run log: {0}")]
    RunLog(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaRecord {
    pub uid: String,
    pub week: u32,
    pub stress_level: f64,
    pub sleep_level: f64,
    pub social_level: f64,
}

fn round_half(x: f64) -> f64 {
    (x * 2.0).round() / 2.0
}

/// Maps a status onto each EMA scale and rounds to the nearest half step.
pub fn derive_ema(uid: &str, week: u32, status: &StatusVector, scales: &EmaScales) -> EmaRecord {
    use crate::student::Dimension;
    let map = |v: u8, s: EmaScale| {
        round_half(s.min + v as f64 / 100.0 * (s.max - s.min)).clamp(s.min, s.max)
    };
    EmaRecord {
        uid: uid.to_string(),
        week,
        stress_level: map(status.get(Dimension::Stress), scales.stress),
        sleep_level: map(status.get(Dimension::Sleep), scales.sleep),
        social_level: map(status.get(Dimension::Social), scales.social),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekOutcome {
    pub uid: String,
    pub week: u32,
    pub journal_text: Option<String>,
    pub assessment: Option<JudgeAssessment>,
    pub status_before: StatusVector,
    pub status_after: StatusVector,
    pub ema: EmaRecord,
    pub exam: Option<ExamResult>,
    pub project: Option<ProjectResult>,
    pub weekly_summary_text: String,
    /// Why the status update failed; the status was carried over.
    pub failure: Option<String>,
}

impl WeekOutcome {
    pub fn carried(&self) -> bool {
        self.failure.is_some()
    }
}

/// Per-student state threaded through the weeks.
#[derive(Debug, Clone)]
pub struct StudentState<'a> {
    pub profile: &'a StudentProfile,
    /// Week about to run.
    pub week: u32,
    pub status: StatusVector,
    /// Summary of the previous week.
    pub summary: String,
}

impl<'a> StudentState<'a> {
    pub fn new(profile: &'a StudentProfile, config: &SimConfig) -> Result<Self, EngineError> {
        let status = default_status(&config.initial_status)
            .map_err(|e| EngineError::Config(e.to_string()))?;
        let summary = with_upcoming(FIRST_WEEK_SUMMARY.to_string(), 1, config);
        Ok(Self {
            profile,
            week: 1,
            status,
            summary,
        })
    }
}

/// Shared read-only inputs.
pub struct Services<'a> {
    pub provider: &'a dyn ChatProvider,
    pub registry: &'a TemplateRegistry,
    pub bank: &'a ExamBank,
    pub config: &'a SimConfig,
    pub schedule: ExamSchedule,
}

impl<'a> Services<'a> {
    pub fn new(
        provider: &'a dyn ChatProvider,
        registry: &'a TemplateRegistry,
        bank: &'a ExamBank,
        config: &'a SimConfig,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            provider,
            registry,
            bank,
            config,
            schedule: config.exam_schedule()?,
        })
    }
}

/// Appends the notices for `week` (exam or project due) to a summary.
fn with_upcoming(mut summary: String, week: u32, config: &SimConfig) -> String {
    if config.is_exam_week(week) {
        summary.push_str(&format!("\n- {EXAM_WEEK_MARKER}."));
    }
    if config.is_project_week(week) {
        summary.push_str("\n- The final project is due this week.");
    }
    summary
}

fn weekly_summary(
    week: u32,
    before: &StatusVector,
    after: &StatusVector,
    exam: Option<&ExamResult>,
    grid: &WeekGrid,
    config: &SimConfig,
) -> String {
    let deltas = after
        .delta_from(before)
        .iter()
        .map(|(d, v)| format!("{} {:+}", d.key(), v))
        .collect::<Vec<_>>()
        .join(", ");
    let mut s = format!("Week {week} recap:\n- Status changes: {deltas}");
    match exam {
        Some(e) => s.push_str(&format!(
            "\n- Exam on {}: scored {}/{}",
            e.topic,
            e.score,
            crate::assessment::QUESTIONS_PER_TOPIC
        )),
        None => s.push_str("\n- No exam was held."),
    }
    let places: Vec<String> = grid
        .location_hours()
        .into_iter()
        .filter(|(l, _)| l != crate::sensing::UNKNOWN_LOCATION)
        .take(3)
        .map(|(l, h)| format!("{l} ({h} h)"))
        .collect();
    if places.is_empty() {
        s.push_str("\n- No places recorded.");
    } else {
        s.push_str(&format!("\n- Most time spent at: {}", places.join(", ")));
    }
    if week < config.n_weeks {
        s = with_upcoming(s, week + 1, config);
    }
    s
}

/// Runs one week for one student and advances `state`.
///
/// Transport or parse failures in the journal or judge step leave the status
/// unchanged; the outcome records why. The returned transcript holds every
/// exchange made this week.
pub fn run_week(
    state: &mut StudentState<'_>,
    grid: &WeekGrid,
    services: &Services<'_>,
) -> Result<(WeekOutcome, Vec<TranscriptRecord>), EngineError> {
    let config = services.config;
    let week = state.week;
    if grid.week_index != week || grid.uid != state.profile.uid {
        return Err(EngineError::Argument(format!(
            "grid for {} week {} given to {} week {week}",
            grid.uid, grid.week_index, state.profile.uid
        )));
    }
    let profile = state.profile;
    let reg = services.registry;
    let mut session = Session::new(
        services.provider,
        &config.model,
        Some(config.seed),
        &profile.uid,
        week,
    );
    let before = state.status;

    // 1. journal
    let report = render_weekly_report(grid, &config.activity_labels);
    let ctx = RenderContext {
        profile: Some(profile),
        status: Some(before),
        sensing_report_text: Some(if report.is_empty() { EMPTY_REPORT.into() } else { report }),
        class_experience_summary: Some(state.summary.clone()),
        ..Default::default()
    };
    let journal_system = reg.render(TemplateId::JournalSystem, &ctx)?;
    let journal_user = reg.render(TemplateId::JournalUser, &ctx)?;
    let journal = session.ask(
        TemplateId::JournalUser,
        Some(journal_system),
        journal_user,
        Role::Generation,
    );

    // 2-3. judge, parse, clamp
    let (journal_text, assessment, failure) = match journal {
        Err(e) => (None, None, Some(format!("journal: {e}"))),
        Ok(j) => {
            let ctx = RenderContext {
                status: Some(before),
                journal_text: Some(j.text.clone()),
                ..Default::default()
            };
            let sys = reg.render(TemplateId::EmotionSystem, &ctx)?;
            let user = reg.render(TemplateId::EmotionUser, &ctx)?;
            match session.ask(TemplateId::EmotionUser, Some(sys), user, Role::Judge) {
                Err(e) => (Some(j.text), None, Some(format!("judge: {e}"))),
                Ok(r) => match parse_status_payload(&r.text) {
                    Ok(a) => (Some(j.text), Some(a), None),
                    Err(e) => (Some(j.text), None, Some(format!("judge reply: {e}"))),
                },
            }
        }
    };
    if let Some(f) = &failure {
        tracing::warn!(uid = %profile.uid, week, "status carried over: {f}");
    }
    let after = assessment.as_ref().map_or(before, |a| a.status);

    // 4. EMA
    let ema = derive_ema(&profile.uid, week, &after, &config.ema_scales);

    // 5. exam
    let exam = if config.is_exam_week(week) {
        Some(administer_exam(
            &mut session,
            reg,
            &services.schedule,
            services.bank,
            profile,
            after,
        )?)
    } else {
        None
    };

    // 6. project
    let project = if config.is_project_week(week) {
        Some(run_project(&mut session, reg, profile, after)?)
    } else {
        None
    };

    // 7. summary for next week
    let summary = weekly_summary(week, &before, &after, exam.as_ref(), grid, config);

    state.status = after;
    state.summary = summary.clone();
    state.week += 1;
    let outcome = WeekOutcome {
        uid: profile.uid.clone(),
        week,
        journal_text,
        assessment,
        status_before: before,
        status_after: after,
        ema,
        exam,
        project,
        weekly_summary_text: summary,
        failure,
    };
    Ok((outcome, session.into_transcript()))
}

fn run_project(
    session: &mut Session<'_>,
    reg: &TemplateRegistry,
    profile: &StudentProfile,
    status: StatusVector,
) -> Result<ProjectResult, EngineError> {
    let ctx = RenderContext {
        profile: Some(profile),
        status: Some(status),
        ..Default::default()
    };
    let sys = reg.render(TemplateId::ProjectSystem, &ctx)?;
    let user = reg.render(TemplateId::ProjectUser, &ctx)?;
    match session.ask(TemplateId::ProjectUser, Some(sys), user, Role::Generation) {
        Ok(r) => Ok(judge_project(session, reg, &profile.uid, &r.text)?),
        Err(e) => Ok(ProjectResult {
            uid: profile.uid.clone(),
            submission_text: String::new(),
            score: None,
            judge_raw_text: format!("error: {e}"),
            retries: 0,
        }),
    }
}

/// Runs every week for one student.
pub fn run_student(
    profile: &StudentProfile,
    grids: &[WeekGrid],
    services: &Services<'_>,
) -> Result<(StudentRun, Vec<TranscriptRecord>), EngineError> {
    let config = services.config;
    let mut state = StudentState::new(profile, config)?;
    let mut outcomes = Vec::with_capacity(config.n_weeks as usize);
    let mut transcript = Vec::new();
    for week in 1..=config.n_weeks {
        let grid = grids
            .iter()
            .find(|g| g.week_index == week)
            .cloned()
            .unwrap_or_else(|| WeekGrid::empty(&profile.uid, week));
        let (outcome, records) = run_week(&mut state, &grid, services)?;
        outcomes.push(outcome);
        transcript.extend(records);
    }
    let exams: Vec<ExamResult> = outcomes.iter().filter_map(|o| o.exam.clone()).collect();
    let project = outcomes.iter().find_map(|o| o.project.as_ref());
    let run = StudentRun {
        uid: profile.uid.clone(),
        cumulative_score: cumulative_score(&exams, project),
        failed_weeks: outcomes.iter().filter(|o| o.carried()).map(|o| o.week).collect(),
        outcomes,
    };
    Ok((run, transcript))
}

/// A finished run: the log plus every exchange, in cohort then week order.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub run_log: RunLog,
    pub transcript: Vec<TranscriptRecord>,
}

/// Simulates the cohort. Students missing from `grids`, or missing weeks,
/// get empty grids.
pub fn run_simulation(
    cohort: &[StudentProfile],
    grids: &BTreeMap<String, Vec<WeekGrid>>,
    services: &Services<'_>,
) -> Result<SimulationOutput, EngineError> {
    if cohort.is_empty() {
        return Err(EngineError::Argument("cohort is empty".into()));
    }
    validate_cohort(cohort).map_err(|e| EngineError::Argument(e.to_string()))?;
    let config = services.config;
    let started_at = config.record_timestamps.then(now_rfc3339);

    let workers = config.max_concurrency.min(cohort.len()).max(1);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(profile) = cohort.get(i) else { break };
                let empty = Vec::new();
                let g = grids.get(&profile.uid).unwrap_or(&empty);
                tracing::info!(uid = %profile.uid, "simulating");
                let result = run_student(profile, g, services);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut results: Vec<_> = rx.into_iter().collect();
    results.sort_by_key(|(i, _)| *i);
    let mut students = Vec::with_capacity(cohort.len());
    let mut transcript = Vec::new();
    for (_, r) in results {
        let (run, records) = r?;
        students.push(run);
        transcript.extend(records);
    }

    let run_log = RunLog {
        schema_version: SCHEMA_VERSION,
        meta: RunMeta {
            seed: config.seed,
            provider: services.provider.describe(),
            model_id: config.model.model_id.clone(),
            generation_temperature: config.model.generation_temperature,
            judge_temperature: config.model.judge_temperature,
            config_hash: config.hash(),
            n_students: cohort.len(),
            n_weeks: config.n_weeks,
            exam_weeks: config.exam_weeks.clone(),
            project_week: config.project_week,
            ema_derivation: "affine map of post-judge status onto each EMA scale, rounded to 0.5"
                .into(),
            cumulative_score: "sum of exam scores plus project score".into(),
            exam_max_total: EXAM_MAX_TOTAL,
            stated_exam_max: STATED_EXAM_MAX,
            started_at,
            finished_at: config.record_timestamps.then(now_rfc3339),
        },
        students,
    };
    Ok(SimulationOutput {
        run_log,
        transcript,
    })
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// The provider selected by `config`. Mock providers get the bank's answer key.
pub fn build_provider(
    config: &SimConfig,
    bank: &ExamBank,
) -> Result<Box<dyn ChatProvider>, EngineError> {
    match config.provider.kind {
        ProviderKind::Mock => {
            let policy = match config.provider.mock_exam_policy {
                MockExamPolicy::Knowledge => ExamPolicy::Knowledge,
                MockExamPolicy::AlwaysCorrect => ExamPolicy::AlwaysCorrect,
            };
            Ok(Box::new(
                MockProvider::new(config.seed)
                    .with_exam_policy(policy)
                    .with_answer_key(bank.answer_key()),
            ))
        }
        ProviderKind::Live => {
            let profile = config.provider.active_profile()?.clone();
            Ok(Box::new(LiveProvider::from_profile(profile)?))
        }
    }
}
