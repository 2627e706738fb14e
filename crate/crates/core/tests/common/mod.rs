#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use studentsim::assessment::ExamBank;
use studentsim::gateway::{parse_mcq_answer, parse_project_score, TranscriptRecord};
use studentsim::prompts::TemplateId;
use studentsim::engine::{build_provider, run_simulation, Services, SimConfig, SimulationOutput};
use studentsim::fixtures::{self, FixtureSet};
use studentsim::prompts::{RenderContext, TemplateRegistry};
use studentsim::sensing::{bucket_weeks, dedup_samples, term_start_epoch, WeekGrid};
use studentsim::student::{BigFive, ClassEntry, MeetingSlot, Scale, StatusVector, StudentProfile};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Compares `actual` with a golden file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(rel: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from output", path.display()))
    }
}

pub fn grids_for(set: &FixtureSet) -> BTreeMap<String, Vec<WeekGrid>> {
    set.profiles
        .iter()
        .zip(&set.sensing)
        .map(|(p, (uid, samples))| {
            let b = bucket_weeks(
                uid,
                &dedup_samples(samples.clone()),
                &set.zones,
                term_start_epoch(p.term_start),
                set.config.n_weeks,
            )
            .unwrap();
            (uid.clone(), b.grids)
        })
        .collect()
}

pub fn simulate(set: &FixtureSet) -> SimulationOutput {
    let provider = build_provider(&set.config, &set.bank).unwrap();
    let registry = TemplateRegistry::builtin();
    let services = Services::new(provider.as_ref(), &registry, &set.bank, &set.config).unwrap();
    run_simulation(&set.profiles, &grids_for(set), &services).unwrap()
}

pub fn fixture_run(seed: u64, students: usize, config: &SimConfig) -> (FixtureSet, SimulationOutput) {
    let set = fixtures::generate(seed, students, config);
    let out = simulate(&set);
    (set, out)
}

pub fn sample_profile() -> StudentProfile {
    StudentProfile {
        uid: "u01".into(),
        big_five: BigFive::new([3.2, 4.1, 2.5, 3.8, 2.9], Scale::default()).unwrap(),
        classes: vec![
            ClassEntry {
                course_code: "COSC 065".into(),
                title: "Smartphone Programming".into(),
                meeting_slots: vec![
                    MeetingSlot { weekday: 0, start_hour: 10, duration_hours: 2 },
                    MeetingSlot { weekday: 2, start_hour: 10, duration_hours: 2 },
                ],
            },
            ClassEntry {
                course_code: "MATH 023".into(),
                title: "Differential Equations".into(),
                meeting_slots: vec![MeetingSlot { weekday: 1, start_hour: 13, duration_hours: 2 }],
            },
        ],
        term_start: NaiveDate::from_ymd_opt(2013, 3, 25).unwrap(),
    }
}

pub fn sample_status() -> StatusVector {
    let map = [
        ("stamina", 62),
        ("knowledge", 55),
        ("stress", 48),
        ("happy", 60),
        ("sleep", 51),
        ("social", 70),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    StatusVector::from_map(&map).unwrap()
}

/// Context every prompt golden file is rendered from.
pub fn fixed_context<'a>(profile: &'a studentsim::student::StudentProfile) -> RenderContext<'a> {
    RenderContext {
        profile: Some(profile),
        status: Some(sample_status()),
        schedule_text: None,
        sensing_report_text: Some(
            "Week 3 Day 0 09:00 | walking | library | main campus library\n\
             Week 3 Day 0 10:00 | stationary | cs-building | computer science building"
                .into(),
        ),
        class_experience_summary: Some("Week 2 recap:\n- Exam on Layouts & Views Basics: scored 7/10".into()),
        journal_text: Some("I studied a lot and slept little.".into()),
        topic: Some("Activities and Intents".into()),
        question: Some("Which method launches an activity?\nA) startActivity\nB) onCreate\nC) finish\nD) setContentView".into()),
        submission_text: Some("Project idea: QuietSpot\nKey features:\n- Map of quiet rooms".into()),
    }
}

/// Regrades every exam in the transcript against the bank's key and adds the
/// parsed project judge score.
pub fn regrade(bank: &ExamBank, uid: &str, transcript: &[TranscriptRecord]) -> u32 {
    let key: BTreeMap<String, _> = bank.answer_key().collect();
    let mut total = 0;
    let mut project = 0;
    for r in transcript.iter().filter(|r| r.uid == uid) {
        let Some(reply) = &r.response_text else { continue };
        match r.template_id {
            TemplateId::Exam => {
                let q = r
                    .user_text
                    .split("Question: ")
                    .nth(1)
                    .and_then(|s| s.split("\n\nPlease provide your answer").next())
                    .unwrap();
                if parse_mcq_answer(reply).ok() == Some(key[q]) {
                    total += 1;
                }
            }
            TemplateId::ProjectJudgeUser => {
                if let Ok(s) = parse_project_score(reply) {
                    project = s as u32;
                }
            }
            _ => {}
        }
    }
    total + project
}
