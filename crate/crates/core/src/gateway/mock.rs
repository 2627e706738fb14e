//! Offline providers.
//!
//! [`MockProvider`] recognises each prompt by its anchor sentence and answers
//! with a transparent rule engine. Replies are a pure function of the request
//! texts and the seed, so a mock run is byte-for-byte reproducible.
//!
//! Journal: built from the sensing lines in the user prompt.
//! `tracked` counts report lines, `active` those walking or running, `places`
//! distinct known locations, `late` lines before 06:00 and `out` evening lines
//! (19:00 or later) at a known place other than the most visited one. The exam
//! flag comes from the experience summary ("Lab exam this week"); the journal
//! mentions worrying when neuroticism is at least 3.4.
//!
//! Judge: reads those numbers back out of the journal and the previous status
//! from the prompt, then (integer floor division, each result clamped to
//! `[0, 100]`):
//!
//! ```text
//! stress    = (prev + 30 + (exam ? 25 : 0) + 2*late + (worried ? 10 : 0) - (active >= 10 ? 10 : 0)) / 2
//! sleep     = (prev + 85 - 4*late) / 2
//! social    = (prev + min(100, 20 + 5*out)) / 2
//! stamina   = (prev + 40 + 2*active - 2*late) / 2
//! knowledge = prev + (exam ? 4 : 2) + (tracked >= 20 ? 1 : 0)
//! happy     = (social + sleep + 100 - stress) / 3
//! ```
//!
//! Exam: with [`ExamPolicy::Knowledge`] the chance of picking the keyed letter
//! is `0.2 + 0.6*knowledge + 0.2*stamina - 0.2*stress` (status scaled to
//! `[0, 1]`, bounded to `[0.05, 0.95]`), drawn from a ChaCha stream seeded by
//! a hash of the request.
//!
//! Project judge: `min(30, 8 + 4*bullets + 2*[has "Problem:"] + h mod 3)`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::parse::Choice;
use super::{ChatProvider, ChatRequest, ChatResponse, GatewayError, ProviderMeta};
use crate::student::{clamp_status, Dimension};

pub const EXAM_WEEK_MARKER: &str = "Lab exam this week";

const JOURNAL_ANCHOR: &str = "You will generate a self-reflection journal";
const PROJECT_ANCHOR: &str = "This is your last week to present final project";
const EMOTION_ANCHOR: &str = "You are an emotional state analyzer.";
const EXAM_ANCHOR: &str = "Please provide your answer as a single letter";
const JUDGE_ANCHOR: &str = "You are an expert university instructor";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExamPolicy {
    /// Correctness probability driven by knowledge, stamina and stress.
    Knowledge,
    AlwaysCorrect,
    Constant(Choice),
}

#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    exam_policy: ExamPolicy,
    answer_key: HashMap<String, Choice>,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            exam_policy: ExamPolicy::Knowledge,
            answer_key: HashMap::new(),
        }
    }

    pub fn with_exam_policy(mut self, policy: ExamPolicy) -> Self {
        self.exam_policy = policy;
        self
    }

    /// Registers keyed answers by the exact question text placed in the exam prompt.
    pub fn with_answer_key(mut self, key: impl IntoIterator<Item = (String, Choice)>) -> Self {
        self.answer_key.extend(key);
        self
    }

    fn digest(&self, req: &ChatRequest) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(req.seed.unwrap_or(0).to_le_bytes());
        h.update(req.system_text.as_deref().unwrap_or("").as_bytes());
        h.update([0u8]);
        h.update(req.user_text.as_bytes());
        h.finalize().into()
    }

    fn rng(&self, req: &ChatRequest) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest(req))
    }

    fn reply(&self, req: &ChatRequest) -> String {
        let system = req.system_text.as_deref().unwrap_or("");
        let user = req.user_text.as_str();
        if system.contains(JOURNAL_ANCHOR) {
            mock_journal(system, user)
        } else if user.contains(PROJECT_ANCHOR) {
            mock_project(system, &mut self.rng(req))
        } else if system.contains(EMOTION_ANCHOR) {
            mock_judge(system, user)
        } else if user.contains(EXAM_ANCHOR) || system.contains(EXAM_ANCHOR) {
            self.mock_exam(user, &mut self.rng(req))
        } else if system.contains(JUDGE_ANCHOR) {
            mock_project_score(user, &mut self.rng(req))
        } else {
            "I am not sure how to respond to that.".to_string()
        }
    }

    fn mock_exam(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let question = between(prompt, "Question: ", "\n\nPlease provide your answer").unwrap_or("");
        let keyed = self.answer_key.get(question).copied();
        let random = Choice::ALL[rng.random_range(0..4)];
        let letter = match (self.exam_policy, keyed) {
            (ExamPolicy::Constant(c), _) => c,
            (ExamPolicy::AlwaysCorrect, Some(k)) => k,
            (ExamPolicy::AlwaysCorrect, None) => random,
            (ExamPolicy::Knowledge, None) => random,
            (ExamPolicy::Knowledge, Some(k)) => {
                let status = exam_status(prompt);
                let get = |key: &str| status.get(key).copied().unwrap_or(50) as f64 / 100.0;
                let p = (0.2 + 0.6 * get("Knowledge") + 0.2 * get("Stamina") - 0.2 * get("Stress"))
                    .clamp(0.05, 0.95);
                if rng.random::<f64>() < p {
                    k
                } else {
                    let others: Vec<_> = Choice::ALL.into_iter().filter(|c| *c != k).collect();
                    others[rng.random_range(0..others.len())]
                }
            }
        };
        match rng.random_range(0..3) {
            0 => letter.to_string(),
            1 => format!("{letter})"),
            _ => format!("I think the answer is {letter}."),
        }
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let text = self.reply(request);
        Ok(ChatResponse {
            meta: ProviderMeta {
                latency_ms: 0,
                prompt_tokens: Some(word_count(request.system_text.as_deref().unwrap_or("")) + word_count(&request.user_text)),
                completion_tokens: Some(word_count(&text)),
                retries: 0,
                in_flight: 1,
            },
            text,
        })
    }

    fn describe(&self) -> String {
        format!("mock(seed={})", self.seed)
    }
}

fn word_count(s: &str) -> u32 {
    s.split_whitespace().count() as u32
}

fn between<'a>(s: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = s.find(start)? + start.len();
    let to = s[from..].find(end).map_or(s.len(), |i| from + i);
    Some(&s[from..to])
}

/// `- key: value` status lines as printed in the student and judge prompts.
fn prompt_status(text: &str) -> BTreeMap<String, i64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?m)^- (stamina|knowledge|stress|happy|sleep|social): (-?\d+)\s*$").unwrap()
    });
    re.captures_iter(text)
        .map(|c| (c[1].to_string(), c[2].parse().unwrap_or(50)))
        .collect()
}

/// `Stamina=NN, Knowledge=NN, ...` from the exam prompt.
fn exam_status(text: &str) -> BTreeMap<String, i64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(Stamina|Knowledge|Stress|Happy|Sleep|Social)=(\d+)").unwrap()
    });
    re.captures_iter(text)
        .map(|c| (c[1].to_string(), c[2].parse().unwrap_or(50)))
        .collect()
}

fn trait_score(text: &str, name: &str) -> Option<f64> {
    let pat = format!(r"(?m)^- {name}: (\d+(?:\.\d+)?)");
    Regex::new(&pat).ok()?.captures(text)?[1].parse().ok()
}

#[derive(Debug, Default, PartialEq, Eq)]
struct WeekFeatures {
    tracked: i64,
    active: i64,
    places: i64,
    late: i64,
    out: i64,
    top_place: Option<String>,
}

fn sensing_features(user: &str) -> WeekFeatures {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?m)^Week \d+ Day \d (\d{2}):00 \| ([^|]*) \| ([^|]*) \| .*$").unwrap()
    });
    let mut f = WeekFeatures::default();
    let mut hours: BTreeMap<String, i64> = BTreeMap::new();
    let mut evenings: Vec<String> = Vec::new();
    for c in re.captures_iter(user) {
        f.tracked += 1;
        let hour: u32 = c[1].parse().unwrap_or(12);
        if hour < 6 {
            f.late += 1;
        }
        if matches!(c[2].trim(), "walking" | "running") {
            f.active += 1;
        }
        let place = c[3].trim();
        if place != "unknown" {
            *hours.entry(place.to_string()).or_default() += 1;
            if hour >= 19 {
                evenings.push(place.to_string());
            }
        }
    }
    f.places = hours.len() as i64;
    f.top_place = hours
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(p, _)| p.clone());
    f.out = evenings
        .iter()
        .filter(|p| Some(*p) != f.top_place.as_ref())
        .count() as i64;
    f
}

fn mock_journal(system: &str, user: &str) -> String {
    let f = sensing_features(user);
    let summary = system
        .split("Your Class Experience Summary:")
        .nth(1)
        .unwrap_or("");
    let exam = summary.contains(EXAM_WEEK_MARKER);
    let neuroticism = trait_score(system, "Neuroticism").unwrap_or(3.0);

    let mut j = format!(
        "This week I had {} hours of tracked activity and was on my feet for {} of them. \
         I moved between {} different places, mostly around {}, and spent {} evening hours out. \
         I was up past midnight for {} hours.",
        f.tracked,
        f.active,
        f.places,
        f.top_place.as_deref().unwrap_or("my room"),
        f.out,
        f.late
    );
    j.push_str(if exam {
        " There was a lab exam this week, so I spent extra time reviewing."
    } else {
        " There was no exam this week, so I tried to keep a steady routine."
    });
    j.push_str(if neuroticism >= 3.4 {
        " I kept worrying about falling behind."
    } else {
        " Overall I felt fairly calm."
    });
    j.push_str(if f.late > 3 {
        " Next week I want to get to bed earlier."
    } else {
        " Next week I want to keep up with the labs."
    });
    j
}

fn journal_number(journal: &str, pattern: &str) -> i64 {
    Regex::new(pattern)
        .ok()
        .and_then(|re| re.captures(journal))
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(0)
}

fn mock_judge(system: &str, user: &str) -> String {
    let journal = user;
    let tracked = journal_number(journal, r"(\d+) hours of tracked activity");
    let active = journal_number(journal, r"on my feet for (\d+)");
    let places = journal_number(journal, r"between (\d+) different places");
    let out = journal_number(journal, r"spent (\d+) evening hours out");
    let late = journal_number(journal, r"past midnight for (\d+) hours");
    let lower = journal.to_lowercase();
    let exam = lower.contains("lab exam this week");
    let worried = lower.contains("worrying");

    let prev_map = prompt_status(system);
    let prev = |k: &str| prev_map.get(k).copied().unwrap_or(50);
    let c = |v: i64| v.clamp(0, 100);

    let stress = c((prev("stress")
        + 30
        + if exam { 25 } else { 0 }
        + 2 * late
        + if worried { 10 } else { 0 }
        - if active >= 10 { 10 } else { 0 })
    .div_euclid(2));
    let sleep = c((prev("sleep") + 85 - 4 * late).div_euclid(2));
    let social = c((prev("social") + (20 + 5 * out).min(100)).div_euclid(2));
    let stamina = c((prev("stamina") + 40 + 2 * active - 2 * late).div_euclid(2));
    let knowledge = c(prev("knowledge") + if exam { 4 } else { 2 } + if tracked >= 20 { 1 } else { 0 });
    let happy = c((social + sleep + 100 - stress).div_euclid(3));

    let raw: BTreeMap<String, i64> = [
        (Dimension::Stamina, stamina),
        (Dimension::Knowledge, knowledge),
        (Dimension::Stress, stress),
        (Dimension::Happy, happy),
        (Dimension::Sleep, sleep),
        (Dimension::Social, social),
    ]
    .into_iter()
    .map(|(d, v)| (d.key().to_string(), v))
    .collect();
    let (status, _) = clamp_status(&raw).expect("six keys");

    format!(
        "{}\n\nReasoning:\n\
         - Stamina: on their feet for {active} hours with {late} late nights.\n\
         - Knowledge: {}.\n\
         - Stress: {}{}.\n\
         - Happy: follows social contact, rest and stress.\n\
         - Sleep: {late} hours awake past midnight.\n\
         - Social: {out} evening hours out across {places} places.",
        status.to_payload(),
        if exam { "studied for the lab exam" } else { "kept up with coursework" },
        if exam { "a lab exam this week" } else { "no exam pressure this week" },
        if worried { " and ongoing worry" } else { "" },
    )
}

const PROJECT_IDEAS: [(&str, &str); 6] = [
    ("StudyBuddy", "students struggle to find peers to review labs with"),
    ("QuietSpot", "finding a quiet place to study on campus wastes time"),
    ("SleepWise", "students underestimate how late nights hurt their week"),
    ("DormSwap", "unused items in dorms end up thrown away"),
    ("LabTimer", "lab deadlines pile up without a clear plan"),
    ("CampusWalk", "students rarely take breaks to move between classes"),
];

const PROJECT_FEATURES: [&str; 5] = [
    "Activity-based screens navigated with explicit Intents",
    "ListView with a custom ArrayAdapter for the main feed",
    "SQLite storage for offline history",
    "Background location check-ins using campus zones",
    "Notifications that adapt to the user's weekly routine",
];

fn mock_project(system: &str, rng: &mut ChaCha8Rng) -> String {
    let (name, problem) = PROJECT_IDEAS[rng.random_range(0..PROJECT_IDEAS.len())];
    let openness = trait_score(system, "Openness").unwrap_or(3.0);
    let knowledge = prompt_status(system).get("knowledge").copied().unwrap_or(50);
    let n = (2 + ((openness - 1.0) / 4.0 * 2.0).round() as usize + usize::from(knowledge >= 60))
        .min(PROJECT_FEATURES.len());
    let features = PROJECT_FEATURES[..n]
        .iter()
        .map(|f| format!("- {f}"))
        .collect::<Vec<_>>()
        .join("\n");
    format!("Project idea: {name}\nProblem: {problem}.\nKey features:\n{features}")
}

fn mock_project_score(user: &str, rng: &mut ChaCha8Rng) -> String {
    let bullets = user.lines().filter(|l| l.trim_start().starts_with("- ")).count() as u32;
    let problem = u32::from(user.contains("Problem:"));
    let score = (8 + 4 * bullets + 2 * problem + rng.random_range(0..3)).min(30);
    format!("The idea is scoped for one semester and addresses a clear need.\nScore: {score}/30")
}

/// Replays a fixed queue of replies and records every request it saw.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    replies: Mutex<VecDeque<Result<String, GatewayError>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(replies: impl IntoIterator<Item = Result<String, GatewayError>>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            seen: Mutex::default(),
        }
    }

    pub fn texts<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.seen.lock().unwrap().push(request.clone());
        let next = self.replies.lock().unwrap().pop_front().unwrap_or_else(|| {
            Err(GatewayError::Transport {
                attempts: 1,
                last: "script exhausted".into(),
            })
        })?;
        if next.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        Ok(ChatResponse {
            text: next,
            meta: ProviderMeta::default(),
        })
    }

    fn describe(&self) -> String {
        "scripted".into()
    }
}
