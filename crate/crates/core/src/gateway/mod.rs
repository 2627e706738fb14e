//! Chat-completion provider abstraction and reply parsers.
//!
//! [`ChatProvider`] is implemented by the HTTP adapter in [`live`] and by the
//! deterministic rule engine in [`mock`]. The parsers in [`parse`] turn the
//! three structured replies (status block, exam letter, `x/30` score) into
//! typed values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod live;
pub mod mock;
pub mod parse;
pub mod session;
pub mod transcript;

pub use live::{ApiStyle, LiveProvider, ProviderProfile, RetryPolicy};
pub use mock::{ExamPolicy, MockProvider, ScriptedProvider};
pub use parse::{
    parse_mcq_answer, parse_project_score, parse_status_payload, Choice, JudgeAssessment,
    ParseError,
};
pub use session::{ModelSettings, Role, Session};
pub use transcript::{TranscriptRecord, TranscriptWriter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("transport failed after {attempts} attempt(s): {last}")]
    Transport { attempts: u32, last: String },
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl GatewayError {
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            GatewayError::Transport { .. } | GatewayError::Http { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// `None` for single-message prompts such as the exam question.
    pub system_text: Option<String>,
    pub user_text: String,
    pub model_id: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(
        system_text: Option<String>,
        user_text: String,
        model_id: &str,
        temperature: f64,
        seed: Option<u64>,
        max_tokens: u32,
    ) -> Result<Self, GatewayError> {
        let req = ChatRequest {
            system_text,
            user_text,
            model_id: model_id.to_string(),
            temperature,
            seed,
            max_tokens,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user text is empty".into()));
        }
        if self.system_text.as_deref().is_some_and(|s| s.trim().is_empty()) {
            return Err(GatewayError::InvalidRequest("system text is empty".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub latency_ms: u64,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
    pub retries: u32,
    /// Requests in flight on this provider when this one was dispatched (itself included).
    pub in_flight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub meta: ProviderMeta,
}

/// A chat-completion backend shared by every simulated student.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    /// Short provider description for run metadata.
    fn describe(&self) -> String;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}
