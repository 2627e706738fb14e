//! Per-student, per-week conversation handle that logs every exchange.

use serde::{Deserialize, Serialize};

use super::transcript::TranscriptRecord;
use super::{ChatProvider, ChatRequest, ChatResponse, GatewayError};
use crate::prompts::TemplateId;

/// Model and sampling settings applied to every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub model_id: String,
    /// Journal and project generation.
    pub generation_temperature: f64,
    /// Emotion analysis, exam answers and project scoring.
    pub judge_temperature: f64,
    pub max_tokens: u32,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            model_id: "mock".into(),
            generation_temperature: 0.7,
            judge_temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generation,
    Judge,
}

pub struct Session<'a> {
    provider: &'a dyn ChatProvider,
    settings: &'a ModelSettings,
    seed: Option<u64>,
    uid: String,
    week: u32,
    transcript: Vec<TranscriptRecord>,
}

impl<'a> Session<'a> {
    pub fn new(
        provider: &'a dyn ChatProvider,
        settings: &'a ModelSettings,
        seed: Option<u64>,
        uid: &str,
        week: u32,
    ) -> Self {
        Self {
            provider,
            settings,
            seed,
            uid: uid.to_string(),
            week,
            transcript: Vec::new(),
        }
    }

    pub fn uid(&self) -> &str {
        &self.uid
    }

    pub fn week(&self) -> u32 {
        self.week
    }

    pub fn set_week(&mut self, week: u32) {
        self.week = week;
    }

    pub fn ask(
        &mut self,
        template_id: TemplateId,
        system_text: Option<String>,
        user_text: String,
        role: Role,
    ) -> Result<ChatResponse, GatewayError> {
        let temperature = match role {
            Role::Generation => self.settings.generation_temperature,
            Role::Judge => self.settings.judge_temperature,
        };
        let request = ChatRequest::new(
            system_text,
            user_text,
            &self.settings.model_id,
            temperature,
            self.seed,
            self.settings.max_tokens,
        )?;
        let result = self.provider.complete(&request);
        let (response_text, error, latency_ms, retries) = match &result {
            Ok(r) => (Some(r.text.clone()), None, r.meta.latency_ms, r.meta.retries),
            Err(e) => (None, Some(e.to_string()), 0, 0),
        };
        self.transcript.push(TranscriptRecord {
            uid: self.uid.clone(),
            week: self.week,
            template_id,
            model_id: request.model_id,
            system_text: request.system_text,
            user_text: request.user_text,
            response_text,
            error,
            latency_ms,
            retries,
        });
        result
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }

    pub fn into_transcript(self) -> Vec<TranscriptRecord> {
        self.transcript
    }
}
