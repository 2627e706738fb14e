//! Student identity and dynamic mental state.
//!
//! A [`StudentProfile`] is fixed for the whole term. The [`StatusVector`] is the
//! six-dimension state the judge rewrites every week; each dimension is an
//! integer in `[0, 100]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STATUS_MIN: i64 = 0;
pub const STATUS_MAX: i64 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum StudentError {
    #[error("status dimension `{key}` is missing")]
    MissingKey { key: &'static str },
    #[error("unknown status dimension `{0}`")]
    UnknownKey(String),
    #[error("status value {value} for `{key}` is outside [0, 100]")]
    OutOfRange { key: String, value: i64 },
    #[error("trait score {value} outside scale [{min}, {max}]")]
    TraitOutOfScale { value: f64, min: f64, max: f64 },
    #[error("invalid scale [{min}, {max}]")]
    InvalidScale { min: f64, max: f64 },
    #[error("uid `{0}` does not match the anonymous pattern uNN")]
    BadUid(String),
    #[error("duplicate uid `{0}` in cohort")]
    DuplicateUid(String),
    #[error("student `{0}` has no enrolled classes")]
    NoClasses(String),
    #[error("class `{course}` has a meeting slot outside the 7x24 week: {detail}")]
    BadSlot { course: String, detail: String },
    #[error("questionnaire item `{0}` is not in the key map")]
    UnknownItem(String),
    #[error("no questionnaire items scored for trait {0}")]
    EmptyTrait(Trait),
    #[error("response {response} to item `{item}` outside [{min}, {max}]")]
    ResponseOutOfScale {
        item: String,
        response: f64,
        min: f64,
        max: f64,
    },
    #[error("key map scales disagree: item `{0}` uses a different scale")]
    MixedScales(String),
    #[error("key map: {0}")]
    KeyMap(String),
    #[error("profile file: {0}")]
    ProfileFile(String),
}

/// One of the six status dimensions, in the order the judge prompt lists them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Stamina,
    Knowledge,
    Stress,
    Happy,
    Sleep,
    Social,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Stamina,
        Dimension::Knowledge,
        Dimension::Stress,
        Dimension::Happy,
        Dimension::Sleep,
        Dimension::Social,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Stamina => "stamina",
            Dimension::Knowledge => "knowledge",
            Dimension::Stress => "stress",
            Dimension::Happy => "happy",
            Dimension::Sleep => "sleep",
            Dimension::Social => "social",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Dimension {
    type Err = StudentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.key() == s)
            .ok_or_else(|| StudentError::UnknownKey(s.to_string()))
    }
}

/// Six-dimension mental state. Every value is guaranteed to lie in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, i64>", into = "BTreeMap<String, i64>")]
pub struct StatusVector {
    values: [u8; 6],
}

impl StatusVector {
    pub fn uniform(value: u8) -> Result<Self, StudentError> {
        check_range("all", value as i64)?;
        Ok(Self { values: [value; 6] })
    }

    /// Builds a vector from a full mapping, rejecting out-of-range values.
    pub fn from_map(map: &BTreeMap<String, i64>) -> Result<Self, StudentError> {
        reject_unknown_keys(map)?;
        let mut values = [0u8; 6];
        for dim in Dimension::ALL {
            let v = *map
                .get(dim.key())
                .ok_or(StudentError::MissingKey { key: dim.key() })?;
            check_range(dim.key(), v)?;
            values[dim.index()] = v as u8;
        }
        Ok(Self { values })
    }

    pub fn get(&self, dim: Dimension) -> u8 {
        self.values[dim.index()]
    }

    pub fn with(mut self, dim: Dimension, value: u8) -> Result<Self, StudentError> {
        check_range(dim.key(), value as i64)?;
        self.values[dim.index()] = value;
        Ok(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dimension, u8)> + '_ {
        Dimension::ALL.into_iter().map(|d| (d, self.get(d)))
    }

    pub fn to_map(&self) -> BTreeMap<String, i64> {
        self.iter().map(|(d, v)| (d.key().to_string(), v as i64)).collect()
    }

    /// Canonical six-key block in the judge's output format.
    pub fn to_payload(&self) -> String {
        let body = self
            .iter()
            .map(|(d, v)| format!("\"{}\": {}", d.key(), v))
            .collect::<Vec<_>>()
            .join(",\n");
        format!("{{\n{body}\n}}")
    }

    /// Signed per-dimension change from `earlier` to `self`.
    pub fn delta_from(&self, earlier: &StatusVector) -> [(Dimension, i16); 6] {
        Dimension::ALL.map(|d| (d, self.get(d) as i16 - earlier.get(d) as i16))
    }
}

impl TryFrom<BTreeMap<String, i64>> for StatusVector {
    type Error = StudentError;

    fn try_from(map: BTreeMap<String, i64>) -> Result<Self, Self::Error> {
        StatusVector::from_map(&map)
    }
}

impl From<StatusVector> for BTreeMap<String, i64> {
    fn from(v: StatusVector) -> Self {
        v.to_map()
    }
}

fn check_range(key: &str, value: i64) -> Result<(), StudentError> {
    if (STATUS_MIN..=STATUS_MAX).contains(&value) {
        Ok(())
    } else {
        Err(StudentError::OutOfRange {
            key: key.to_string(),
            value,
        })
    }
}

fn reject_unknown_keys(map: &BTreeMap<String, i64>) -> Result<(), StudentError> {
    match map.keys().find(|k| k.parse::<Dimension>().is_err()) {
        Some(k) => Err(StudentError::UnknownKey(k.clone())),
        None => Ok(()),
    }
}

/// Initial status configuration: a base value plus per-dimension overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialStatus {
    pub base: i64,
    pub overrides: BTreeMap<String, i64>,
}

impl Default for InitialStatus {
    fn default() -> Self {
        Self {
            base: 50,
            overrides: BTreeMap::new(),
        }
    }
}

/// The configured week-1 status (all 50 unless overridden).
pub fn default_status(config: &InitialStatus) -> Result<StatusVector, StudentError> {
    reject_unknown_keys(&config.overrides)?;
    let map = Dimension::ALL
        .iter()
        .map(|d| {
            let v = config.overrides.get(d.key()).copied().unwrap_or(config.base);
            (d.key().to_string(), v)
        })
        .collect();
    StatusVector::from_map(&map)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampWarning {
    pub dimension: Dimension,
    pub raw: i64,
    pub clamped: u8,
}

impl fmt::Display for ClampWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} value {} clamped to {}",
            self.dimension, self.raw, self.clamped
        )
    }
}

/// Clamps every dimension into `[0, 100]`, reporting each value that moved.
/// Extra keys are ignored; a missing key is a schema error.
pub fn clamp_status(
    raw: &BTreeMap<String, i64>,
) -> Result<(StatusVector, Vec<ClampWarning>), StudentError> {
    let mut values = [0u8; 6];
    let mut warnings = Vec::new();
    for dim in Dimension::ALL {
        let v = *raw
            .get(dim.key())
            .ok_or(StudentError::MissingKey { key: dim.key() })?;
        let clamped = v.clamp(STATUS_MIN, STATUS_MAX) as u8;
        if clamped as i64 != v {
            warnings.push(ClampWarning {
                dimension: dim,
                raw: v,
                clamped,
            });
        }
        values[dim.index()] = clamped;
    }
    Ok((StatusVector { values }, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::Openness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::Neuroticism,
    ];
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Trait::Openness => "openness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::Neuroticism => "neuroticism",
        };
        f.write_str(s)
    }
}

impl FromStr for Trait {
    type Err = StudentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Trait::ALL
            .into_iter()
            .find(|t| t.to_string() == lower || t.to_string()[..1] == lower)
            .ok_or_else(|| StudentError::KeyMap(format!("unknown trait `{s}`")))
    }
}

/// Closed real interval used for questionnaire responses and trait scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

impl Scale {
    pub fn new(min: f64, max: f64) -> Result<Self, StudentError> {
        if min.is_finite() && max.is_finite() && min < max {
            Ok(Self { min, max })
        } else {
            Err(StudentError::InvalidScale { min, max })
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn midpoint(&self) -> f64 {
        (self.min + self.max) / 2.0
    }

    /// Reverse-keys a response: `min + max - r`.
    pub fn reflect(&self, r: f64) -> f64 {
        self.min + self.max - r
    }
}

impl Default for Scale {
    fn default() -> Self {
        Self { min: 1.0, max: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigFive {
    pub openness: f64,
    pub conscientiousness: f64,
    pub extraversion: f64,
    pub agreeableness: f64,
    pub neuroticism: f64,
    #[serde(default)]
    pub scale: Scale,
}

impl BigFive {
    pub fn new(scores: [f64; 5], scale: Scale) -> Result<Self, StudentError> {
        let b = BigFive {
            openness: scores[0],
            conscientiousness: scores[1],
            extraversion: scores[2],
            agreeableness: scores[3],
            neuroticism: scores[4],
            scale,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn get(&self, t: Trait) -> f64 {
        match t {
            Trait::Openness => self.openness,
            Trait::Conscientiousness => self.conscientiousness,
            Trait::Extraversion => self.extraversion,
            Trait::Agreeableness => self.agreeableness,
            Trait::Neuroticism => self.neuroticism,
        }
    }

    pub fn validate(&self) -> Result<(), StudentError> {
        Scale::new(self.scale.min, self.scale.max)?;
        for t in Trait::ALL {
            let v = self.get(t);
            if !self.scale.contains(v) {
                return Err(StudentError::TraitOutOfScale {
                    value: v,
                    min: self.scale.min,
                    max: self.scale.max,
                });
            }
        }
        Ok(())
    }

    /// Score rescaled onto `[0, 1]`.
    pub fn normalized(&self, t: Trait) -> f64 {
        (self.get(t) - self.scale.min) / (self.scale.max - self.scale.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMapEntry {
    pub item_id: String,
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub polarity: Polarity,
    pub scale_min: f64,
    pub scale_max: f64,
}

/// Reads a key map CSV: `item_id,trait,polarity,scale_min,scale_max`.
pub fn load_key_map(path: &Path) -> Result<Vec<KeyMapEntry>, StudentError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| StudentError::KeyMap(e.to_string()))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| StudentError::KeyMap(e.to_string())))
        .collect()
}

/// Scores a Big Five questionnaire: per trait, the mean of its keyed responses
/// with reverse-keyed items reflected about the scale midpoint.
pub fn score_big_five(
    questionnaire: &[(String, f64)],
    key_map: &[KeyMapEntry],
) -> Result<BigFive, StudentError> {
    let keys: HashMap<&str, &KeyMapEntry> =
        key_map.iter().map(|k| (k.item_id.as_str(), k)).collect();
    let scale = match key_map.first() {
        Some(k) => Scale::new(k.scale_min, k.scale_max)?,
        None => Scale::default(),
    };
    if let Some(k) = key_map
        .iter()
        .find(|k| k.scale_min != scale.min || k.scale_max != scale.max)
    {
        return Err(StudentError::MixedScales(k.item_id.clone()));
    }

    let mut sums: BTreeMap<Trait, (f64, usize)> = BTreeMap::new();
    for (item, response) in questionnaire {
        let key = keys
            .get(item.as_str())
            .ok_or_else(|| StudentError::UnknownItem(item.clone()))?;
        if !scale.contains(*response) {
            return Err(StudentError::ResponseOutOfScale {
                item: item.clone(),
                response: *response,
                min: scale.min,
                max: scale.max,
            });
        }
        let value = match key.polarity {
            Polarity::Positive => *response,
            Polarity::Reverse => scale.reflect(*response),
        };
        let slot = sums.entry(key.trait_).or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }

    let mut scores = [0.0; 5];
    for (i, t) in Trait::ALL.into_iter().enumerate() {
        let (sum, n) = sums.get(&t).copied().ok_or(StudentError::EmptyTrait(t))?;
        scores[i] = sum / n as f64;
    }
    BigFive::new(scores, scale)
}

/// One weekly meeting: weekday 0-6 (0 = first day of the term week), start hour, length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingSlot {
    pub weekday: u8,
    pub start_hour: u8,
    pub duration_hours: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub course_code: String,
    pub title: String,
    pub meeting_slots: Vec<MeetingSlot>,
}

impl ClassEntry {
    pub fn validate(&self) -> Result<(), StudentError> {
        for s in &self.meeting_slots {
            let end = s.start_hour as u16 + s.duration_hours as u16;
            if s.weekday > 6 || s.start_hour > 23 || s.duration_hours == 0 || end > 24 {
                return Err(StudentError::BadSlot {
                    course: self.course_code.clone(),
                    detail: format!(
                        "weekday {} start {} duration {}",
                        s.weekday, s.start_hour, s.duration_hours
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub uid: String,
    pub big_five: BigFive,
    pub classes: Vec<ClassEntry>,
    pub term_start: NaiveDate,
}

impl StudentProfile {
    pub fn validate(&self) -> Result<(), StudentError> {
        if !uid_pattern().is_match(&self.uid) {
            return Err(StudentError::BadUid(self.uid.clone()));
        }
        if self.classes.is_empty() {
            return Err(StudentError::NoClasses(self.uid.clone()));
        }
        self.big_five.validate()?;
        self.classes.iter().try_for_each(ClassEntry::validate)
    }

    /// Class list as it appears in the student prompts, one class per line.
    pub fn formatted_class_schedule(&self) -> String {
        const DAYS: [&str; 7] = ["Day 0", "Day 1", "Day 2", "Day 3", "Day 4", "Day 5", "Day 6"];
        self.classes
            .iter()
            .map(|c| {
                let slots = c
                    .meeting_slots
                    .iter()
                    .map(|s| {
                        format!(
                            "{} {:02}:00-{:02}:00",
                            DAYS[s.weekday as usize],
                            s.start_hour,
                            s.start_hour + s.duration_hours
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("- {} {}: {}", c.course_code, c.title, slots)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn uid_pattern() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^u\d{2}$").unwrap())
}

/// Validates a whole cohort: each profile plus uid uniqueness.
pub fn validate_cohort(cohort: &[StudentProfile]) -> Result<(), StudentError> {
    let mut seen = std::collections::HashSet::new();
    for p in cohort {
        p.validate()?;
        if !seen.insert(p.uid.as_str()) {
            return Err(StudentError::DuplicateUid(p.uid.clone()));
        }
    }
    Ok(())
}

/// Loads the profile file (a JSON array of [`StudentProfile`]) and validates it.
pub fn load_profiles(path: &Path) -> Result<Vec<StudentProfile>, StudentError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| StudentError::ProfileFile(e.to_string()))?;
    let cohort: Vec<StudentProfile> =
        serde_json::from_str(&text).map_err(|e| StudentError::ProfileFile(e.to_string()))?;
    validate_cohort(&cohort)?;
    Ok(cohort)
}
