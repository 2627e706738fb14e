//! Seeded synthetic cohort, so the pipeline runs without the StudentLife data.
//!
//! Each student follows a daily routine driven by their Big Five scores:
//! conscientious students wake earlier and visit the library more, extraverts
//! spend evenings in social places, and high-neuroticism students stay up
//! later. Sleep hours are mostly unsampled, as a duty-cycled phone would be.
//! Ground-truth EMA answers are sparse and loosely follow the same traits.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assessment::{ExamBank, Question, Topic, DEFAULT_TOPICS};
use crate::engine::SimConfig;
use crate::evaluation::GroundTruthEma;
use crate::gateway::Choice;
use crate::sensing::{term_start_epoch, LocationZone, SensingSample, SECS_PER_DAY, SECS_PER_HOUR, SECS_PER_WEEK};
use crate::student::{BigFive, ClassEntry, MeetingSlot, Scale, StudentProfile};

pub const DEFAULT_COHORT: usize = 26;

pub fn default_term_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 3, 25).expect("valid date")
}

#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub profiles: Vec<StudentProfile>,
    pub zones: Vec<LocationZone>,
    pub bank: ExamBank,
    /// `(uid, samples)` in cohort order.
    pub sensing: Vec<(String, Vec<SensingSample>)>,
    pub truth: Vec<GroundTruthEma>,
    pub config: SimConfig,
}

/// Paths written by [`write_fixtures`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixturePaths {
    pub config: PathBuf,
    pub profiles: PathBuf,
    pub zones: PathBuf,
    pub exam_bank: PathBuf,
    pub ground_truth: PathBuf,
    pub activity_dir: PathBuf,
    pub gps_dir: PathBuf,
}

impl FixturePaths {
    pub fn under(dir: &Path) -> Self {
        Self {
            config: dir.join("config.toml"),
            profiles: dir.join("profiles.json"),
            zones: dir.join("zones.json"),
            exam_bank: dir.join("exam_bank.json"),
            ground_truth: dir.join("ground_truth.csv"),
            activity_dir: dir.join("sensing").join("activity"),
            gps_dir: dir.join("sensing").join("gps"),
        }
    }
}

const HOME: usize = 0;
const CS: usize = 1;
const LIBRARY: usize = 2;
const DINING: usize = 3;
const GYM: usize = 4;
const GREEN: usize = 5;
const SOCIAL: usize = 6;
const ACADEMIC: usize = 7;
/// Index past the zone table: a point off campus.
const OFF_CAMPUS: usize = 8;

const ZONES: [(&str, &str, f64, f64, f64); 8] = [
    ("dorm", "residence hall", 43.70690, -72.28590, 60.0),
    ("cs-building", "computer science building", 43.70560, -72.28680, 50.0),
    ("library", "main campus library", 43.70540, -72.28860, 60.0),
    ("dining-hall", "campus dining hall", 43.70250, -72.29050, 50.0),
    ("gym", "athletics center", 43.70290, -72.28450, 70.0),
    ("green", "campus green", 43.70440, -72.28870, 80.0),
    ("social-house", "student social house", 43.70300, -72.29350, 50.0),
    ("academic-hall", "lecture and seminar hall", 43.70400, -72.29080, 50.0),
];
const OFF_CAMPUS_POINT: (f64, f64) = (43.64200, -72.25100);

pub fn zones() -> Vec<LocationZone> {
    ZONES
        .iter()
        .map(|&(label, description, lat, lon, radius_m)| LocationZone {
            label: label.into(),
            description: description.into(),
            lat,
            lon,
            radius_m,
        })
        .collect()
}

const OTHER_COURSES: [(&str, &str); 6] = [
    ("MATH 023", "Differential Equations"),
    ("PSYC 001", "Introduction to Psychology"),
    ("ECON 001", "The Price System"),
    ("ENGL 005", "Writing and Rhetoric"),
    ("PHYS 013", "Introductory Physics"),
    ("HIST 010", "Topics in World History"),
];

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn gen_profile(uid: String, rng: &mut ChaCha8Rng) -> StudentProfile {
    let scores = std::array::from_fn(|_| round1(rng.random_range(1.6..4.6)));
    let mut classes = vec![ClassEntry {
        course_code: "COSC 065".into(),
        title: "Smartphone Programming".into(),
        meeting_slots: vec![
            MeetingSlot { weekday: 0, start_hour: 10, duration_hours: 2 },
            MeetingSlot { weekday: 2, start_hour: 10, duration_hours: 2 },
            MeetingSlot { weekday: 4, start_hour: 10, duration_hours: 1 },
        ],
    }];
    let mut others: Vec<usize> = (0..OTHER_COURSES.len()).collect();
    others.shuffle(rng);
    for (k, &i) in others.iter().take(2).enumerate() {
        let start = if k == 0 { 13 } else { 15 };
        let days: [u8; 2] = if rng.random_bool(0.5) { [1, 3] } else { [0, 2] };
        classes.push(ClassEntry {
            course_code: OTHER_COURSES[i].0.into(),
            title: OTHER_COURSES[i].1.into(),
            meeting_slots: days
                .iter()
                .map(|&d| MeetingSlot { weekday: d, start_hour: start, duration_hours: 2 })
                .collect(),
        });
    }
    StudentProfile {
        uid,
        big_five: BigFive::new(scores, Scale::default()).expect("scores in range"),
        classes,
        term_start: default_term_start(),
    }
}

fn in_class(p: &StudentProfile, day: usize, hour: usize) -> Option<usize> {
    p.classes.iter().enumerate().find_map(|(i, c)| {
        c.meeting_slots
            .iter()
            .any(|s| {
                s.weekday as usize == day
                    && hour >= s.start_hour as usize
                    && hour < (s.start_hour + s.duration_hours) as usize
            })
            .then_some(if i == 0 { CS } else { ACADEMIC })
    })
}

/// Where the student is at `hour`, or `None` while asleep.
#[allow(clippy::too_many_arguments)]
fn plan_hour(
    p: &StudentProfile,
    day: usize,
    hour: usize,
    wake: usize,
    bed_after_midnight: usize,
    exam_week: bool,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, u8)> {
    let bf = &p.big_five;
    let awake_late = hour < bed_after_midnight;
    if hour < wake && !awake_late {
        return None;
    }
    if awake_late {
        let place = if rng.random_bool(0.3) { LIBRARY } else { HOME };
        return Some((place, 0));
    }
    if let Some(place) = in_class(p, day, hour) {
        return Some((place, 0));
    }
    let weekend = day >= 5;
    let place = match hour {
        8 | 12 | 18 => DINING,
        h if (9..18).contains(&h) && !weekend => {
            let study = 0.3 + 0.1 * bf.conscientiousness + if exam_week { 0.15 } else { 0.0 };
            if rng.random_bool(study.min(0.95)) {
                LIBRARY
            } else if rng.random_bool(0.3) {
                GREEN
            } else {
                HOME
            }
        }
        h if h >= 19 => {
            let out = 0.08 * bf.extraversion + if weekend { 0.15 } else { 0.0 };
            if rng.random_bool(out.min(0.9)) {
                if rng.random_bool(0.15) { OFF_CAMPUS } else { SOCIAL }
            } else if rng.random_bool(0.2) {
                GYM
            } else {
                HOME
            }
        }
        _ => {
            if rng.random_bool(0.15) {
                GYM
            } else if rng.random_bool(0.3) {
                GREEN
            } else {
                HOME
            }
        }
    };
    let activity = match place {
        GYM => {
            if rng.random_bool(0.6) { 2 } else { 1 }
        }
        GREEN | SOCIAL | OFF_CAMPUS => {
            if rng.random_bool(0.5) { 1 } else { 0 }
        }
        DINING => 0,
        _ => {
            if rng.random_bool(0.12) { 1 } else { 0 }
        }
    };
    let activity = if rng.random_bool(0.03) { 3 } else { activity };
    Some((place, activity))
}

fn place_point(place: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (lat, lon) = if place == OFF_CAMPUS {
        OFF_CAMPUS_POINT
    } else {
        (ZONES[place].2, ZONES[place].3)
    };
    // within ~25 m of the center
    (
        lat + rng.random_range(-0.0002..0.0002),
        lon + rng.random_range(-0.0002..0.0002),
    )
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn gen_sensing(
    p: &StudentProfile,
    n_weeks: u32,
    exam_weeks: &[u32],
    rng: &mut ChaCha8Rng,
) -> (Vec<SensingSample>, Vec<[u32; 2]>) {
    let t0 = term_start_epoch(p.term_start);
    let bf = &p.big_five;
    let mut out = Vec::new();
    // late hours (< 06:00) and tracked hours per week, for ground truth
    let mut weekly = Vec::new();
    for week in 1..=n_weeks {
        let exam = exam_weeks.contains(&week);
        let mut late_hours = 0;
        let mut tracked = 0;
        for day in 0..7usize {
            let wake = (9.5 - 0.6 * bf.conscientiousness + rng.random_range(-1.0..1.0)).round() as usize;
            let late_bias = 0.12 * bf.neuroticism - 0.08 * bf.conscientiousness + if exam { 0.2 } else { 0.0 };
            let bed = if rng.random_bool(late_bias.clamp(0.02, 0.8)) {
                rng.random_range(1..4)
            } else {
                0
            };
            for hour in 0..24usize {
                let start = t0
                    + (week as i64 - 1) * SECS_PER_WEEK
                    + day as i64 * SECS_PER_DAY
                    + hour as i64 * SECS_PER_HOUR;
                let plan = plan_hour(p, day, hour, wake, bed, exam, rng);
                let Some((place, activity)) = plan else {
                    if rng.random_bool(0.1) {
                        out.push(SensingSample::Activity { timestamp: start + rng.random_range(0..3600), activity_code: 0 });
                    }
                    continue;
                };
                if rng.random_bool(0.08) {
                    continue; // phone off
                }
                tracked += 1;
                if hour < 6 {
                    late_hours += 1;
                }
                for _ in 0..rng.random_range(2..5) {
                    let code = if rng.random_bool(0.85) { activity } else { 0 };
                    out.push(SensingSample::Activity {
                        timestamp: start + rng.random_range(0..3600),
                        activity_code: code,
                    });
                }
                for _ in 0..rng.random_range(1..3) {
                    let (lat, lon) = place_point(place, rng);
                    out.push(SensingSample::Gps {
                        timestamp: start + rng.random_range(0..3600),
                        lat: round6(lat),
                        lon: round6(lon),
                    });
                }
            }
        }
        weekly.push([late_hours, tracked]);
    }
    // a few samples just outside the term window
    for k in 1..=3 {
        out.push(SensingSample::Activity { timestamp: t0 - k * 600, activity_code: 0 });
        out.push(SensingSample::Activity {
            timestamp: t0 + n_weeks as i64 * SECS_PER_WEEK + k * 600,
            activity_code: 1,
        });
    }
    out.sort_by_key(SensingSample::timestamp);
    (out, weekly)
}

fn likert(x: f64) -> f64 {
    x.round().clamp(1.0, 5.0)
}

fn gen_truth(
    p: &StudentProfile,
    idx: usize,
    weekly: &[[u32; 2]],
    exam_weeks: &[u32],
    rng: &mut ChaCha8Rng,
) -> Vec<GroundTruthEma> {
    let bf = &p.big_five;
    // the last student answered only the stress item
    let stress_only = idx == DEFAULT_COHORT - 1;
    let mut out = Vec::new();
    for (w, &[late, _tracked]) in weekly.iter().enumerate() {
        let week = w as u32 + 1;
        if !rng.random_bool(0.65) {
            continue;
        }
        let exam = exam_weeks.contains(&week);
        let noise = |rng: &mut ChaCha8Rng| rng.random_range(-0.8..0.8);
        let stress = likert(1.0 + 0.6 * bf.neuroticism + if exam { 0.8 } else { 0.0 } + noise(rng));
        let sleep = likert(4.2 - 0.25 * late as f64 + 0.1 * bf.conscientiousness + noise(rng));
        let social = likert(0.8 * bf.extraversion + 0.3 + noise(rng));
        let keep = |rng: &mut ChaCha8Rng| rng.random_bool(0.85);
        out.push(GroundTruthEma {
            uid: p.uid.clone(),
            week,
            stress: Some(stress),
            sleep: (!stress_only && keep(rng)).then_some(sleep),
            social: (!stress_only && keep(rng)).then_some(social),
        });
    }
    out
}

struct Concept(&'static str, &'static str);

const CONCEPTS: [[Concept; 10]; 6] = [
    [
        Concept("View", "the basic UI building block that occupies a rectangular area of the screen"),
        Concept("ViewGroup", "an invisible container that holds child views and defines their layout"),
        Concept("LinearLayout", "a container that arranges its children in a single row or column"),
        Concept("RelativeLayout", "a container that positions children relative to siblings or the parent"),
        Concept("ConstraintLayout", "a container that positions children with constraints to keep the hierarchy flat"),
        Concept("FrameLayout", "a container that stacks children on top of each other"),
        Concept("match_parent", "a size value that makes a view as large as its parent allows"),
        Concept("wrap_content", "a size value that makes a view just large enough for its content"),
        Concept("the dp unit", "density-independent pixels that keep sizes consistent across screens"),
        Concept("android:id", "an attribute that names a view so code can look it up"),
    ],
    [
        Concept("Button", "a clickable control that triggers an action"),
        Concept("EditText", "a text field that accepts user input"),
        Concept("TextView", "a widget that displays read-only text"),
        Concept("View.OnClickListener", "the callback interface invoked when a view is clicked"),
        Concept("setOnClickListener", "the method that registers a click callback on a view"),
        Concept("Toast", "a brief pop-up message that disappears on its own"),
        Concept("CheckBox", "a two-state control that can be checked independently of others"),
        Concept("RadioGroup", "a container that allows only one of its radio buttons to be selected"),
        Concept("android:onClick", "an XML attribute naming the activity method to call on a click"),
        Concept("ImageView", "a widget that displays an image resource or bitmap"),
    ],
    [
        Concept("Activity", "a single screen with a user interface"),
        Concept("onCreate", "the lifecycle callback where an activity inflates its layout"),
        Concept("onPause", "the lifecycle callback run when an activity loses the foreground"),
        Concept("onDestroy", "the final lifecycle callback before an activity is released"),
        Concept("an explicit Intent", "a message that starts a specific component named by its class"),
        Concept("an implicit Intent", "a message that declares an action for any capable app to handle"),
        Concept("startActivity", "the method that launches the activity described by an intent"),
        Concept("putExtra", "the method that attaches key-value data to an intent"),
        Concept("AndroidManifest.xml", "the file that declares components, permissions and the launcher activity"),
        Concept("the back stack", "the ordered history of activities the user can navigate back through"),
    ],
    [
        Concept("Material Design", "a design system of guidelines for visuals, motion and interaction"),
        Concept("a theme", "a set of style attributes applied to a whole app or activity"),
        Concept("a style", "a reusable group of view attributes such as color and padding"),
        Concept("padding", "space inside a view between its border and its content"),
        Concept("margin", "space outside a view that separates it from its neighbors"),
        Concept("gravity", "an attribute that aligns a view's content within the view"),
        Concept("layout_gravity", "an attribute that aligns a view within its parent"),
        Concept("layout_weight", "an attribute that shares leftover LinearLayout space among children"),
        Concept("strings.xml", "the resource file that holds user-visible text for localization"),
        Concept("the layout-land folder", "the resource folder for layouts used in landscape orientation"),
    ],
    [
        Concept("ListView", "a widget that shows a vertically scrolling list of items"),
        Concept("ArrayAdapter", "an adapter that binds an array or list of objects to row views"),
        Concept("getView", "the adapter method that returns the row view for a position"),
        Concept("convertView", "a recycled row view handed to the adapter to avoid re-inflation"),
        Concept("the ViewHolder pattern", "caching child view references to avoid repeated lookups"),
        Concept("notifyDataSetChanged", "the call that tells a list its underlying data changed"),
        Concept("AdapterView.OnItemClickListener", "the callback invoked when a list row is tapped"),
        Concept("simple_list_item_1", "a built-in row layout with a single TextView"),
        Concept("setAdapter", "the method that connects an adapter to a list widget"),
        Concept("RecyclerView", "a flexible list widget that enforces view holders and uses layout managers"),
    ],
    [
        Concept("SharedPreferences", "storage for small key-value pairs of primitive data"),
        Concept("SQLite", "an embedded relational database stored on the device"),
        Concept("SQLiteOpenHelper", "a helper that manages database creation and version upgrades"),
        Concept("internal storage", "private files that only the app itself can access"),
        Concept("external storage", "shared storage that the user and other apps can access"),
        Concept("a ContentProvider", "a component that exposes app data to other apps through a uniform interface"),
        Concept("a Cursor", "an object giving read access to the rows returned by a query"),
        Concept("Room", "an abstraction over SQLite with compile-time checked queries"),
        Concept("SharedPreferences.Editor.apply", "the call that saves preference changes asynchronously"),
        Concept("onUpgrade", "the helper callback run when the database version increases"),
    ],
];

/// Sixty questions on the default topics. Each stem asks for a concept's
/// definition; the distractors are definitions of other concepts in the topic.
pub fn exam_bank(rng: &mut ChaCha8Rng) -> ExamBank {
    let topics = DEFAULT_TOPICS
        .iter()
        .zip(&CONCEPTS)
        .map(|(name, concepts)| {
            let questions = concepts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut others: Vec<usize> = (0..concepts.len()).filter(|&j| j != i).collect();
                    others.shuffle(rng);
                    let mut opts: Vec<&str> = others[..3].iter().map(|&j| concepts[j].1).collect();
                    let key = rng.random_range(0..4);
                    opts.insert(key, c.1);
                    Question {
                        stem: format!("Which of the following best describes {}?", c.0),
                        options: std::array::from_fn(|k| opts[k].to_string()),
                        answer_key: Choice::ALL[key],
                    }
                })
                .collect();
            Topic {
                name: name.to_string(),
                questions,
            }
        })
        .collect();
    ExamBank { topics }
}

/// Builds `n_students` students for a `config.n_weeks` term.
pub fn generate(seed: u64, n_students: usize, config: &SimConfig) -> FixtureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bank = exam_bank(&mut rng);
    let mut profiles = Vec::with_capacity(n_students);
    let mut sensing = Vec::with_capacity(n_students);
    let mut truth = Vec::new();
    for i in 0..n_students {
        let mut srng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64 + 1) << 32));
        let p = gen_profile(format!("u{:02}", i + 1), &mut srng);
        let (samples, weekly) = gen_sensing(&p, config.n_weeks, &config.exam_weeks, &mut srng);
        truth.extend(gen_truth(&p, i, &weekly, &config.exam_weeks, &mut srng));
        sensing.push((p.uid.clone(), samples));
        profiles.push(p);
    }
    FixtureSet {
        profiles,
        zones: zones(),
        bank,
        sensing,
        truth,
        config: SimConfig {
            seed,
            ..config.clone()
        },
    }
}

fn json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    std::fs::write(path, s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

/// Writes the fixture set under `dir` in the layout of [`FixturePaths`].
pub fn write_fixtures(dir: &Path, set: &FixtureSet) -> std::io::Result<FixturePaths> {
    let paths = FixturePaths::under(dir);
    std::fs::create_dir_all(&paths.activity_dir)?;
    std::fs::create_dir_all(&paths.gps_dir)?;
    std::fs::write(&paths.config, set.config.to_toml_string())?;
    json_file(&paths.profiles, &set.profiles)?;
    json_file(&paths.zones, &set.zones)?;
    json_file(&paths.exam_bank, &set.bank)?;

    let mut gt = std::io::BufWriter::new(std::fs::File::create(&paths.ground_truth)?);
    writeln!(gt, "uid,week,stress,sleep,social")?;
    for t in &set.truth {
        writeln!(gt, "{},{},{},{},{}", t.uid, t.week, fmt_opt(t.stress), fmt_opt(t.sleep), fmt_opt(t.social))?;
    }
    gt.flush()?;

    for (uid, samples) in &set.sensing {
        let mut act = std::io::BufWriter::new(std::fs::File::create(paths.activity_dir.join(format!("{uid}.csv")))?);
        let mut gps = std::io::BufWriter::new(std::fs::File::create(paths.gps_dir.join(format!("{uid}.csv")))?);
        writeln!(act, "timestamp,activity_inference")?;
        writeln!(gps, "timestamp,latitude,longitude")?;
        for s in samples {
            match *s {
                SensingSample::Activity { timestamp, activity_code } => {
                    writeln!(act, "{timestamp},{activity_code}")?
                }
                SensingSample::Gps { timestamp, lat, lon } => writeln!(gps, "{timestamp},{lat},{lon}")?,
            }
        }
        act.flush()?;
        gps.flush()?;
    }
    Ok(paths)
}
