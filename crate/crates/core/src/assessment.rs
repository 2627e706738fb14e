//! Weekly lab exams and the final project.
//!
//! The bank holds six topics of ten multiple-choice questions. Exam weeks are
//! paired with topics in list order, so with the default weeks 2-7 the topic
//! index is `week - 2`. The project is scored out of 30 by the judge.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{parse_mcq_answer, parse_project_score, Choice, Role, Session};
use crate::prompts::{RenderContext, TemplateId, TemplateRegistry};
use crate::student::{StatusVector, StudentProfile};

pub const TOPICS_PER_BANK: usize = 6;
pub const QUESTIONS_PER_TOPIC: usize = 10;
pub const PROJECT_MAX: u8 = 30;
/// Exam points available with the six-topic bank.
pub const EXAM_MAX_TOTAL: u32 = (TOPICS_PER_BANK * QUESTIONS_PER_TOPIC) as u32;
/// Lab-assessment maximum quoted in the course description. It does not match
/// six topics of ten questions; run logs record both figures.
pub const STATED_EXAM_MAX: u32 = 70;

pub const DEFAULT_TOPICS: [&str; TOPICS_PER_BANK] = [
    "Layouts & Views Basics",
    "UI Components & Event Handling",
    "Activities and Intents",
    "Layouts & UI Design",
    "ListView & ArrayAdapter",
    "Data Storage",
];

pub const FORMAT_REMINDER: &str = "Reminder: answer in the form x/30, for example 24/30.";

#[derive(Debug, Error, PartialEq)]
pub enum AssessmentError {
    #[error("exam bank: {0}")]
    Io(String),
    #[error("exam bank invalid: {0}")]
    Validation(String),
    #[error("week {week} is not an exam week (exam weeks: {weeks:?})")]
    NotExamWeek { week: u32, weeks: Vec<u32> },
    #[error("exam schedule: {0}")]
    Schedule(String),
    #[error("project submission is empty")]
    EmptySubmission,
    #[error("prompt: {0}")]
    Prompt(#[from] crate::prompts::PromptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub stem: String,
    pub options: [String; 4],
    pub answer_key: Choice,
}

impl Question {
    /// Stem and lettered options, as placed in the exam prompt.
    pub fn prompt_text(&self) -> String {
        let mut s = self.stem.clone();
        for (c, o) in Choice::ALL.iter().zip(&self.options) {
            s.push_str(&format!("\n{c}) {o}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub name: String,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamBank {
    pub topics: Vec<Topic>,
}

#[derive(Deserialize)]
struct RawQuestion {
    stem: String,
    options: Vec<String>,
    answer_key: String,
}

#[derive(Deserialize)]
struct RawTopic {
    name: String,
    questions: Vec<RawQuestion>,
}

#[derive(Deserialize)]
struct RawBank {
    topics: Vec<RawTopic>,
}

impl ExamBank {
    /// Parses and validates bank JSON, citing 1-based topic/question indices.
    pub fn from_json(text: &str) -> Result<Self, AssessmentError> {
        let raw: RawBank =
            serde_json::from_str(text).map_err(|e| AssessmentError::Validation(e.to_string()))?;
        let bad = |m: String| Err(AssessmentError::Validation(m));
        if raw.topics.len() != TOPICS_PER_BANK {
            return bad(format!(
                "expected {TOPICS_PER_BANK} topics, found {}",
                raw.topics.len()
            ));
        }
        let mut topics = Vec::with_capacity(TOPICS_PER_BANK);
        for (ti, t) in raw.topics.into_iter().enumerate() {
            let tn = ti + 1;
            if t.name.trim().is_empty() {
                return bad(format!("topic {tn} has no name"));
            }
            if t.questions.len() != QUESTIONS_PER_TOPIC {
                return bad(format!(
                    "topic {tn} has {} questions, expected {QUESTIONS_PER_TOPIC}",
                    t.questions.len()
                ));
            }
            let mut questions = Vec::with_capacity(QUESTIONS_PER_TOPIC);
            for (qi, q) in t.questions.into_iter().enumerate() {
                let qn = qi + 1;
                let answer_key: Choice = q.answer_key.parse().map_err(|_| {
                    AssessmentError::Validation(format!(
                        "topic {tn} question {qn}: answer_key `{}` is not A-D",
                        q.answer_key
                    ))
                })?;
                let options: [String; 4] = q.options.try_into().map_err(|o: Vec<String>| {
                    AssessmentError::Validation(format!(
                        "topic {tn} question {qn}: expected 4 options, found {}",
                        o.len()
                    ))
                })?;
                if q.stem.trim().is_empty() || options.iter().any(|o| o.trim().is_empty()) {
                    return bad(format!("topic {tn} question {qn}: empty stem or option"));
                }
                questions.push(Question {
                    stem: q.stem,
                    options,
                    answer_key,
                });
            }
            topics.push(Topic {
                name: t.name,
                questions,
            });
        }
        Ok(ExamBank { topics })
    }

    pub fn question_count(&self) -> usize {
        self.topics.iter().map(|t| t.questions.len()).sum()
    }

    pub fn uses_default_topics(&self) -> bool {
        self.topics.iter().map(|t| t.name.as_str()).eq(DEFAULT_TOPICS)
    }

    /// Question text to answer key, for offline providers.
    pub fn answer_key(&self) -> impl Iterator<Item = (String, Choice)> + '_ {
        self.topics
            .iter()
            .flat_map(|t| &t.questions)
            .map(|q| (q.prompt_text(), q.answer_key))
    }
}

pub fn load_exam_bank(path: &Path) -> Result<ExamBank, AssessmentError> {
    let text = std::fs::read_to_string(path).map_err(|e| AssessmentError::Io(e.to_string()))?;
    ExamBank::from_json(&text)
}

/// Pairs exam weeks with bank topics in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamSchedule {
    weeks: Vec<u32>,
}

impl ExamSchedule {
    pub fn new(weeks: &[u32]) -> Result<Self, AssessmentError> {
        if weeks.len() > TOPICS_PER_BANK {
            return Err(AssessmentError::Schedule(format!(
                "{} exam weeks but only {TOPICS_PER_BANK} topics",
                weeks.len()
            )));
        }
        if weeks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AssessmentError::Schedule(
                "exam weeks must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            weeks: weeks.to_vec(),
        })
    }

    pub fn weeks(&self) -> &[u32] {
        &self.weeks
    }

    pub fn topic_index(&self, week: u32) -> Option<usize> {
        self.weeks.iter().position(|w| *w == week)
    }
}

impl Default for ExamSchedule {
    fn default() -> Self {
        Self {
            weeks: (2..=7).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub given: Option<Choice>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamResult {
    pub uid: String,
    pub week: u32,
    pub topic: String,
    pub answers: Vec<AnswerRecord>,
    pub score: u8,
    /// False when the provider failed mid-exam.
    pub complete: bool,
}

/// Runs the week's ten-question exam through the student agent.
///
/// Unparseable replies count as wrong with no recorded answer. A transport
/// failure stops the exam and marks it incomplete; questions answered so far
/// keep their marks.
pub fn administer_exam(
    session: &mut Session<'_>,
    registry: &TemplateRegistry,
    schedule: &ExamSchedule,
    bank: &ExamBank,
    profile: &StudentProfile,
    status: StatusVector,
) -> Result<ExamResult, AssessmentError> {
    let week = session.week();
    let topic_idx = schedule
        .topic_index(week)
        .ok_or_else(|| AssessmentError::NotExamWeek {
            week,
            weeks: schedule.weeks().to_vec(),
        })?;
    let topic = &bank.topics[topic_idx];
    let mut answers = Vec::with_capacity(topic.questions.len());
    let mut complete = true;
    for q in &topic.questions {
        let ctx = RenderContext {
            profile: Some(profile),
            status: Some(status),
            topic: Some(topic.name.clone()),
            question: Some(q.prompt_text()),
            ..Default::default()
        };
        let prompt = registry.render(TemplateId::Exam, &ctx)?;
        match session.ask(TemplateId::Exam, None, prompt, Role::Judge) {
            Ok(reply) => {
                let given = match parse_mcq_answer(&reply.text) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        tracing::warn!(uid = %profile.uid, week, error = %e, "unparseable exam answer");
                        None
                    }
                };
                answers.push(AnswerRecord {
                    given,
                    correct: given == Some(q.answer_key),
                });
            }
            Err(e) => {
                tracing::warn!(uid = %profile.uid, week, error = %e, "exam aborted");
                complete = false;
                break;
            }
        }
    }
    let score = answers.iter().filter(|a| a.correct).count() as u8;
    Ok(ExamResult {
        uid: profile.uid.clone(),
        week,
        topic: topic.name.clone(),
        answers,
        score,
        complete,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectResult {
    pub uid: String,
    pub submission_text: String,
    /// `None` when the judge never produced a parseable `x/30`.
    pub score: Option<u8>,
    pub judge_raw_text: String,
    /// Format-reminder re-asks used.
    pub retries: u32,
}

/// Scores a project submission out of 30. One re-ask with a format reminder
/// follows an unparseable reply; a second failure leaves the project unscored.
pub fn judge_project(
    session: &mut Session<'_>,
    registry: &TemplateRegistry,
    uid: &str,
    submission_text: &str,
) -> Result<ProjectResult, AssessmentError> {
    if submission_text.trim().is_empty() {
        return Err(AssessmentError::EmptySubmission);
    }
    let system = registry.render(TemplateId::ProjectJudgeSystem, &RenderContext::default())?;
    let user = registry.render(
        TemplateId::ProjectJudgeUser,
        &RenderContext {
            submission_text: Some(submission_text.to_string()),
            ..Default::default()
        },
    )?;
    let mut result = ProjectResult {
        uid: uid.to_string(),
        submission_text: submission_text.to_string(),
        score: None,
        judge_raw_text: String::new(),
        retries: 0,
    };
    for attempt in 0..2u32 {
        let text = if attempt == 0 {
            user.clone()
        } else {
            format!("{user}\n\n{FORMAT_REMINDER}")
        };
        result.retries = attempt;
        match session.ask(
            TemplateId::ProjectJudgeUser,
            Some(system.clone()),
            text,
            Role::Judge,
        ) {
            Ok(reply) => {
                result.judge_raw_text = reply.text;
                if let Ok(score) = parse_project_score(&result.judge_raw_text) {
                    result.score = Some(score);
                    return Ok(result);
                }
                tracing::warn!(uid, attempt, "project score did not parse");
            }
            Err(e) => {
                result.judge_raw_text = format!("error: {e}");
                return Ok(result);
            }
        }
    }
    Ok(result)
}

/// Sum of exam scores plus the project score; missing pieces count as zero.
pub fn cumulative_score(exams: &[ExamResult], project: Option<&ProjectResult>) -> u32 {
    exams.iter().map(|e| e.score as u32).sum::<u32>()
        + project.and_then(|p| p.score).unwrap_or(0) as u32
}
