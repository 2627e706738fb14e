//! Run log, transcript and timeline persistence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EngineError, WeekOutcome};
use crate::gateway::{TranscriptRecord, TranscriptWriter};
use crate::student::Dimension;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub provider: String,
    pub model_id: String,
    pub generation_temperature: f64,
    pub judge_temperature: f64,
    pub config_hash: String,
    pub n_students: usize,
    pub n_weeks: u32,
    pub exam_weeks: Vec<u32>,
    pub project_week: u32,
    pub ema_derivation: String,
    pub cumulative_score: String,
    /// Points available from the exam bank.
    pub exam_max_total: u32,
    /// Maximum quoted by the course description.
    pub stated_exam_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRun {
    pub uid: String,
    pub outcomes: Vec<WeekOutcome>,
    pub cumulative_score: u32,
    pub failed_weeks: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub meta: RunMeta,
    pub students: Vec<StudentRun>,
}

impl RunLog {
    pub fn outcomes(&self) -> impl Iterator<Item = &WeekOutcome> {
        self.students.iter().flat_map(|s| &s.outcomes)
    }

    pub fn student(&self, uid: &str) -> Option<&StudentRun> {
        self.students.iter().find(|s| s.uid == uid)
    }

    /// Checks that each student covers weeks `1..=n_weeks` once, in order.
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(EngineError::RunLog(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for s in &self.students {
            let weeks: Vec<u32> = s.outcomes.iter().map(|o| o.week).collect();
            if weeks != (1..=self.meta.n_weeks).collect::<Vec<_>>() {
                return Err(EngineError::RunLog(format!(
                    "{} covers weeks {weeks:?}, expected 1..={}",
                    s.uid, self.meta.n_weeks
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run log serializes");
        s.push('\n');
        s
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EngineError {
    EngineError::Io(format!("{}: {e}", path.display()))
}

pub fn write_run_log(path: &Path, log: &RunLog) -> Result<(), EngineError> {
    std::fs::write(path, log.to_json()).map_err(|e| io_err(path, e))
}

pub fn read_run_log(path: &Path) -> Result<RunLog, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let log: RunLog =
        serde_json::from_str(&text).map_err(|e| EngineError::RunLog(format!("{}: {e}", path.display())))?;
    log.validate()?;
    Ok(log)
}

pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> Result<(), EngineError> {
    let mut w = TranscriptWriter::create(path).map_err(|e| io_err(path, e))?;
    for r in records {
        w.write(r).map_err(|e| io_err(path, e))?;
    }
    w.finish().map_err(|e| io_err(path, e))
}

/// One timeline row: status after the week plus the derived EMA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub uid: String,
    pub week: u32,
    pub stamina: u8,
    pub knowledge: u8,
    pub stress: u8,
    pub happy: u8,
    pub sleep: u8,
    pub social: u8,
    pub ema_stress: f64,
    pub ema_sleep: f64,
    pub ema_social: f64,
    /// Status carried over from the previous week.
    pub carried: bool,
}

impl From<&WeekOutcome> for TimelineRow {
    fn from(o: &WeekOutcome) -> Self {
        let s = &o.status_after;
        TimelineRow {
            uid: o.uid.clone(),
            week: o.week,
            stamina: s.get(Dimension::Stamina),
            knowledge: s.get(Dimension::Knowledge),
            stress: s.get(Dimension::Stress),
            happy: s.get(Dimension::Happy),
            sleep: s.get(Dimension::Sleep),
            social: s.get(Dimension::Social),
            ema_stress: o.ema.stress_level,
            ema_sleep: o.ema.sleep_level,
            ema_social: o.ema.social_level,
            carried: o.carried(),
        }
    }
}

/// Timeline rows for `uids` (all students when `None`), in run order.
pub fn emit_status_timelines(
    log: &RunLog,
    uids: Option<&[String]>,
) -> Result<Vec<TimelineRow>, EngineError> {
    let students: Vec<_> = match uids {
        None => log.students.iter().collect(),
        Some(uids) => uids
            .iter()
            .map(|u| log.student(u).ok_or_else(|| EngineError::UnknownStudent(u.clone())))
            .collect::<Result<_, _>>()?,
    };
    Ok(students
        .into_iter()
        .flat_map(|s| s.outcomes.iter().map(TimelineRow::from))
        .collect())
}

pub fn write_timelines_csv<W: Write>(out: W, rows: &[TimelineRow]) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| EngineError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| EngineError::Io(e.to_string()))
}
