//! Prompt templates and their renderer.
//!
//! Template bodies live as text files under `templates/` next to a
//! `manifest.json` naming each template's placeholders. A placeholder is
//! `{name}`; a literal brace is written `{{` or `}}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::student::{Dimension, StatusVector, StudentProfile, Trait};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),
    #[error("template `{id}` is missing context field for placeholder `{placeholder}`")]
    Missing { id: TemplateId, placeholder: String },
    #[error("template `{id}` is malformed at byte {offset}: {reason}")]
    Syntax {
        id: String,
        offset: usize,
        reason: &'static str,
    },
    #[error("template `{id}` placeholders {found:?} differ from manifest {declared:?}")]
    ManifestMismatch {
        id: String,
        found: BTreeSet<String>,
        declared: BTreeSet<String>,
    },
    #[error("template `{0}` is not in the manifest")]
    NotInManifest(TemplateId),
    #[error("template directory: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    JournalSystem,
    JournalUser,
    ProjectSystem,
    ProjectUser,
    EmotionSystem,
    EmotionUser,
    Exam,
    ProjectJudgeSystem,
    ProjectJudgeUser,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::JournalSystem,
        TemplateId::JournalUser,
        TemplateId::ProjectSystem,
        TemplateId::ProjectUser,
        TemplateId::EmotionSystem,
        TemplateId::EmotionUser,
        TemplateId::Exam,
        TemplateId::ProjectJudgeSystem,
        TemplateId::ProjectJudgeUser,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::JournalSystem => "journal_system",
            TemplateId::JournalUser => "journal_user",
            TemplateId::ProjectSystem => "project_system",
            TemplateId::ProjectUser => "project_user",
            TemplateId::EmotionSystem => "emotion_system",
            TemplateId::EmotionUser => "emotion_user",
            TemplateId::Exam => "exam",
            TemplateId::ProjectJudgeSystem => "project_judge_system",
            TemplateId::ProjectJudgeUser => "project_judge_user",
        }
    }

    /// The sentence each rendered prompt must carry unchanged.
    pub fn anchor(self) -> &'static str {
        match self {
            TemplateId::JournalSystem | TemplateId::ProjectSystem => {
                "You are a university student simulator."
            }
            TemplateId::JournalUser => "TASK: Reflect on your experience this week in class, on campus, and in your social life.",
            TemplateId::ProjectUser => "Please generate a creative and feasible mobile app project idea that demonstrates your understanding of smartphone programming concepts.",
            TemplateId::EmotionSystem => "You are an emotional state analyzer.",
            TemplateId::EmotionUser => "Here is the journal entry from the student:",
            TemplateId::Exam => "Please provide your answer as a single letter (A, B, C, or D).",
            TemplateId::ProjectJudgeSystem => "You are an expert university instructor and judge for a smartphone programming class.",
            TemplateId::ProjectJudgeUser => "Please provide your evaluation.",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    body: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn parse(id: TemplateId, body: &str) -> Result<Self, PromptError> {
        Ok(Self {
            id,
            body: body.to_string(),
            segments: parse_segments(id.as_str(), body)?,
        })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(p) => Some(p.clone()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    pub fn render(&self, ctx: &RenderContext<'_>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Placeholder(name) => {
                    let v = ctx.value(name).ok_or_else(|| PromptError::Missing {
                        id: self.id,
                        placeholder: name.clone(),
                    })?;
                    out.push_str(&v);
                }
            }
        }
        Ok(out)
    }
}

fn parse_segments(id: &str, body: &str) -> Result<Vec<Segment>, PromptError> {
    let err = |offset, reason| PromptError::Syntax {
        id: id.to_string(),
        offset,
        reason,
    };
    let bytes = body.as_bytes();
    let mut segments = Vec::new();
    let mut lit = String::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                lit.push('{');
                i += 2;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                lit.push('}');
                i += 2;
            }
            b'{' => {
                let close = body[i + 1..]
                    .find('}')
                    .ok_or_else(|| err(i, "unclosed placeholder"))?;
                let name = &body[i + 1..i + 1 + close];
                let valid = name
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
                if !valid {
                    return Err(err(i, "invalid placeholder name"));
                }
                if !lit.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut lit)));
                }
                segments.push(Segment::Placeholder(name.to_string()));
                i += close + 2;
            }
            b'}' => return Err(err(i, "unmatched closing brace")),
            _ => {
                let ch = body[i..].chars().next().expect("in bounds");
                lit.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    if !lit.is_empty() {
        segments.push(Segment::Literal(lit));
    }
    Ok(segments)
}

/// Values available for substitution. Each template demands only some of them.
#[derive(Debug, Clone, Default)]
pub struct RenderContext<'a> {
    pub profile: Option<&'a StudentProfile>,
    pub status: Option<StatusVector>,
    /// Overrides the schedule derived from `profile`.
    pub schedule_text: Option<String>,
    pub sensing_report_text: Option<String>,
    pub class_experience_summary: Option<String>,
    pub journal_text: Option<String>,
    pub topic: Option<String>,
    pub question: Option<String>,
    pub submission_text: Option<String>,
}

impl RenderContext<'_> {
    fn trait_score(&self, t: Trait) -> Option<String> {
        self.profile.map(|p| format!("{:.1}", p.big_five.get(t)))
    }

    fn dim(&self, key: &str) -> Option<String> {
        let d: Dimension = key.parse().ok()?;
        self.status.map(|s| s.get(d).to_string())
    }

    fn value(&self, name: &str) -> Option<String> {
        match name {
            "O_score" => self.trait_score(Trait::Openness),
            "C_score" => self.trait_score(Trait::Conscientiousness),
            "E_score" => self.trait_score(Trait::Extraversion),
            "A_score" => self.trait_score(Trait::Agreeableness),
            "N_score" => self.trait_score(Trait::Neuroticism),
            "formatted_class_schedule" => self
                .schedule_text
                .clone()
                .or_else(|| self.profile.map(StudentProfile::formatted_class_schedule)),
            "current_emotion_status" => self.status.map(|s| format_status_lines(&s)),
            "sensing_data_formatted" => self.sensing_report_text.clone(),
            "class_experience_summary" => self.class_experience_summary.clone(),
            "journal_text" => self.journal_text.clone(),
            "topic" => self.topic.clone(),
            "question" => self.question.clone(),
            "submission_text" => self.submission_text.clone(),
            other => match other.strip_prefix("emotion_status.") {
                Some(key) => self.dim(key),
                None => self.dim(other),
            },
        }
    }
}

/// Status as `- key: value` lines in judge key order.
pub fn format_status_lines(status: &StatusVector) -> String {
    status
        .iter()
        .map(|(d, v)| format!("- {}: {}", d.key(), v))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub placeholders: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub templates: Vec<ManifestEntry>,
}

/// Read-only set of all nine templates.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

const BUILTIN_MANIFEST: &str = include_str!("../templates/manifest.json");

fn builtin_body(id: TemplateId) -> &'static str {
    match id {
        TemplateId::JournalSystem => include_str!("../templates/journal_system.txt"),
        TemplateId::JournalUser => include_str!("../templates/journal_user.txt"),
        TemplateId::ProjectSystem => include_str!("../templates/project_system.txt"),
        TemplateId::ProjectUser => include_str!("../templates/project_user.txt"),
        TemplateId::EmotionSystem => include_str!("../templates/emotion_system.txt"),
        TemplateId::EmotionUser => include_str!("../templates/emotion_user.txt"),
        TemplateId::Exam => include_str!("../templates/exam.txt"),
        TemplateId::ProjectJudgeSystem => include_str!("../templates/project_judge_system.txt"),
        TemplateId::ProjectJudgeUser => include_str!("../templates/project_judge_user.txt"),
    }
}

impl TemplateRegistry {
    /// Templates compiled into the library.
    pub fn builtin() -> Self {
        let manifest: Manifest =
            serde_json::from_str(BUILTIN_MANIFEST).expect("builtin manifest is valid JSON");
        Self::from_manifest(manifest, |entry| Ok(builtin_body(entry.parse()?).to_string()))
            .expect("builtin templates are consistent with their manifest")
    }

    /// Loads `manifest.json` and the template files it names from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let io = |e: std::io::Error| PromptError::Io(e.to_string());
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).map_err(io)?)
                .map_err(|e| PromptError::Io(e.to_string()))?;
        let files: BTreeMap<String, String> = manifest
            .templates
            .iter()
            .map(|e| (e.id.clone(), e.file.clone()))
            .collect();
        Self::from_manifest(manifest, |id| {
            let body = std::fs::read_to_string(dir.join(&files[id])).map_err(io)?;
            Ok(body.strip_suffix('\n').unwrap_or(&body).to_string())
        })
    }

    fn from_manifest(
        manifest: Manifest,
        mut body_of: impl FnMut(&str) -> Result<String, PromptError>,
    ) -> Result<Self, PromptError> {
        let mut templates = BTreeMap::new();
        for entry in &manifest.templates {
            let id: TemplateId = entry.id.parse()?;
            let tpl = PromptTemplate::parse(id, &body_of(&entry.id)?)?;
            let found = tpl.placeholders();
            if found != entry.placeholders {
                return Err(PromptError::ManifestMismatch {
                    id: entry.id.clone(),
                    found,
                    declared: entry.placeholders.clone(),
                });
            }
            templates.insert(id, tpl);
        }
        if let Some(missing) = TemplateId::ALL.into_iter().find(|t| !templates.contains_key(t)) {
            return Err(PromptError::NotInManifest(missing));
        }
        Ok(Self { templates })
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, ctx: &RenderContext<'_>) -> Result<String, PromptError> {
        self.get(id).render(ctx)
    }

    /// Placeholder names a template needs, looked up by string id.
    pub fn list_required_placeholders(&self, id: &str) -> Result<BTreeSet<String>, PromptError> {
        Ok(self.get(id.parse()?).placeholders())
    }
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn journal_user_needs_only_sensing() {
        let reg = TemplateRegistry::builtin();
        let set = reg.list_required_placeholders("journal_user").unwrap();
        assert_eq!(set, BTreeSet::from(["sensing_data_formatted".to_string()]));
    }

    #[test]
    fn exam_needs_topic_and_question() {
        let set = TemplateRegistry::builtin()
            .list_required_placeholders("exam")
            .unwrap();
        assert!(set.contains("topic") && set.contains("question"));
    }

    #[test]
    fn unknown_id_is_error() {
        assert_eq!(
            TemplateRegistry::builtin()
                .list_required_placeholders("haiku")
                .unwrap_err(),
            PromptError::UnknownTemplate("haiku".into())
        );
    }

    #[test]
    fn missing_field_names_placeholder() {
        let err = TemplateRegistry::builtin()
            .render(TemplateId::EmotionUser, &RenderContext::default())
            .unwrap_err();
        assert_eq!(
            err,
            PromptError::Missing {
                id: TemplateId::EmotionUser,
                placeholder: "journal_text".into()
            }
        );
    }

    #[test]
    fn emotion_system_lists_all_dimensions() {
        let ctx = RenderContext {
            status: Some(StatusVector::uniform(50).unwrap()),
            ..Default::default()
        };
        let out = TemplateRegistry::builtin()
            .render(TemplateId::EmotionSystem, &ctx)
            .unwrap();
        assert!(out.contains("['stamina', 'knowledge', 'stress', 'happy', 'sleep', 'social']"));
        assert!(out.contains("- stamina: 50\n- knowledge: 50"));
        assert!(out.contains("Output format:\n{\n\"stamina\": value,"));
    }

    #[test]
    fn escaped_braces_and_syntax_errors() {
        let t = PromptTemplate::parse(TemplateId::Exam, "a {{b}} {topic}").unwrap();
        let ctx = RenderContext {
            topic: Some("T".into()),
            ..Default::default()
        };
        assert_eq!(t.render(&ctx).unwrap(), "a {b} T");
        assert!(PromptTemplate::parse(TemplateId::Exam, "x {unclosed").is_err());
        assert!(PromptTemplate::parse(TemplateId::Exam, "x } y").is_err());
        assert!(PromptTemplate::parse(TemplateId::Exam, "x {1bad} y").is_err());
    }

    #[test]
    fn load_dir_matches_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        let loaded = TemplateRegistry::load_dir(&dir).unwrap();
        let builtin = TemplateRegistry::builtin();
        for id in TemplateId::ALL {
            assert_eq!(loaded.get(id).body(), builtin.get(id).body());
        }
    }

    #[test]
    fn bodies_contain_their_anchor() {
        let reg = TemplateRegistry::builtin();
        for id in TemplateId::ALL {
            assert!(reg.get(id).body().contains(id.anchor()), "{id}");
        }
    }
}
