//! Parsers for the structured parts of model replies.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::student::{clamp_status, Dimension, StatusVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no status block with all six keys; missing `{missing}`")]
    MissingKey { missing: &'static str, raw: String },
    #[error("no answer letter A-D found")]
    NoChoice { raw: String },
    #[error("no `x/30` score found")]
    NoScore { raw: String },
    #[error("score {value}/30 is out of range")]
    ScoreOutOfRange { value: u64, raw: String },
}

impl ParseError {
    pub fn raw(&self) -> &str {
        match self {
            ParseError::MissingKey { raw, .. }
            | ParseError::NoChoice { raw }
            | ParseError::NoScore { raw }
            | ParseError::ScoreOutOfRange { raw, .. } => raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeAssessment {
    pub status: StatusVector,
    pub reasoning_text: String,
    pub warnings: Vec<String>,
}

fn key_regexes() -> &'static [(Dimension, Regex); 6] {
    static RE: OnceLock<[(Dimension, Regex); 6]> = OnceLock::new();
    RE.get_or_init(|| {
        Dimension::ALL.map(|d| {
            let pat = format!(
                r#"(?i)["']?\b{}\b["']?\s*[:=]\s*(-?\d+(?:\.\d+)?)"#,
                d.key()
            );
            (d, Regex::new(&pat).unwrap())
        })
    })
}

/// First value for each dimension key found in `region`.
fn scan_keys(region: &str) -> BTreeMap<String, i64> {
    let mut found = BTreeMap::new();
    for (d, re) in key_regexes() {
        if let Some(c) = re.captures(region) {
            if let Ok(v) = c[1].parse::<f64>() {
                found.insert(d.key().to_string(), v.round() as i64);
            }
        }
    }
    found
}

/// Byte ranges of innermost `{ ... }` blocks.
fn brace_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut open = None;
    for (i, c) in text.char_indices() {
        match c {
            '{' => open = Some(i),
            '}' => {
                if let Some(s) = open.take() {
                    blocks.push((s, i + 1));
                }
            }
            _ => {}
        }
    }
    blocks
}

/// Extracts the judge's six-key status block and the reasoning after it.
///
/// The first brace-delimited block holding all six keys wins. When no such
/// block exists the whole text is scanned for `key: value` pairs, so replies
/// that drop the braces still parse. Values are clamped into `[0, 100]`.
pub fn parse_status_payload(text: &str) -> Result<JudgeAssessment, ParseError> {
    let mut candidates: Vec<(BTreeMap<String, i64>, usize)> = brace_blocks(text)
        .into_iter()
        .map(|(s, e)| (scan_keys(&text[s..e]), e))
        .collect();
    candidates.push((scan_keys(text), text.len()));

    let full = candidates.iter().find(|(m, _)| m.len() == Dimension::ALL.len());
    let Some((map, end)) = full else {
        let best = candidates
            .iter()
            .max_by_key(|(m, _)| m.len())
            .map(|(m, _)| m.clone())
            .unwrap_or_default();
        let missing = Dimension::ALL
            .into_iter()
            .find(|d| !best.contains_key(d.key()))
            .map(Dimension::key)
            .unwrap_or("stamina");
        return Err(ParseError::MissingKey {
            missing,
            raw: text.to_string(),
        });
    };

    let (status, clamps) = clamp_status(map).expect("all six keys present");
    let reasoning_text = if *end < text.len() {
        text[*end..].trim().to_string()
    } else {
        String::new()
    };
    Ok(JudgeAssessment {
        status,
        reasoning_text,
        warnings: clamps.iter().map(ToString::to_string).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
    C,
    D,
}

impl Choice {
    pub const ALL: [Choice; 4] = [Choice::A, Choice::B, Choice::C, Choice::D];

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_char(c: char) -> Option<Choice> {
        match c.to_ascii_uppercase() {
            'A' => Some(Choice::A),
            'B' => Some(Choice::B),
            'C' => Some(Choice::C),
            'D' => Some(Choice::D),
            _ => None,
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["A", "B", "C", "D"][self.index()])
    }
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next().and_then(Choice::from_char), chars.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(format!("`{s}` is not one of A, B, C, D")),
        }
    }
}

fn mcq_regexes() -> &'static [Regex; 4] {
    static RE: OnceLock<[Regex; 4]> = OnceLock::new();
    RE.get_or_init(|| {
        [
            // "answer is C", "Answer: (b)", "option D"
            Regex::new(r"(?i)\b(?:answer|option|choice)\b(?:\s+is)?\s*[:\-]?\s*\(?([a-d])\b").unwrap(),
            // a letter closed by ")" or ".", or alone at the end of a line
            Regex::new(r"(?im)\b([a-d])(?:[).]|[ \t]*$)").unwrap(),
            Regex::new(r"\b([A-D])\b").unwrap(),
            // lowercase "a" is left out here: it is usually the article
            Regex::new(r"\b([b-d])\b").unwrap(),
        ]
    })
}

/// First standalone answer letter in a reply.
///
/// Strongest forms win: an explicit "answer is X", then a letter followed by
/// `)` / `.` / end of line, then any standalone capital, then lowercase b-d.
pub fn parse_mcq_answer(text: &str) -> Result<Choice, ParseError> {
    if let Ok(c) = text.trim().trim_end_matches(['.', ')']).trim_start_matches('(').parse() {
        return Ok(c);
    }
    mcq_regexes()
        .iter()
        .find_map(|re| re.captures(text))
        .and_then(|c| c[1].chars().next())
        .and_then(Choice::from_char)
        .ok_or_else(|| ParseError::NoChoice {
            raw: text.to_string(),
        })
}

/// First `<integer>/30` in a reply; the numerator must be within `[0, 30]`.
pub fn parse_project_score(text: &str) -> Result<u8, ParseError> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?:^|[^\d.\-])(\d+)\s*/\s*30(?:\D|$)").unwrap());
    let caps = re.captures(text).ok_or_else(|| ParseError::NoScore {
        raw: text.to_string(),
    })?;
    let value: u64 = caps[1].parse().unwrap_or(u64::MAX);
    if value > 30 {
        return Err(ParseError::ScoreOutOfRange {
            value,
            raw: text.to_string(),
        });
    }
    Ok(value as u8)
}
