//! HTTP chat-completion adapter.
//!
//! Two request/response shapes are supported:
//!
//! | style    | endpoint                                   | auth header             | reply text                          |
//! |----------|--------------------------------------------|-------------------------|-------------------------------------|
//! | `openai` | `{endpoint}/chat/completions`              | `Authorization: Bearer` | `choices[0].message.content`        |
//! | `gemini` | `{endpoint}/models/{model}:generateContent`| `x-goog-api-key`        | `candidates[0].content.parts[0].text` |
//!
//! Transient failures (connection errors, HTTP 429 and 5xx) are retried with
//! exponential backoff and optional jitter. At most `max_concurrency` requests
//! are in flight at once, and `requests_per_minute` spaces out dispatches.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatProvider, ChatRequest, ChatResponse, GatewayError, ProviderMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    Openai,
    Gemini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_delay_ms: u64,
    pub max_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_delay_ms: 500,
            max_delay_ms: 8_000,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based), before jitter.
    pub fn base_delay(&self, retry: u32) -> Duration {
        let exp = self
            .initial_delay_ms
            .saturating_mul(1u64 << (retry.saturating_sub(1)).min(32));
        Duration::from_millis(exp.min(self.max_delay_ms))
    }
}

/// A named live provider configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    pub name: String,
    pub style: ApiStyle,
    pub endpoint: String,
    pub model_id: String,
    /// Either `${ENV_VAR}` or a literal token. Only `${...}` is interpolated.
    pub api_key: String,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> u64 {
    60
}

/// Expands a `${VAR}` reference from the environment.
pub fn resolve_secret(value: &str) -> Result<String, GatewayError> {
    let trimmed = value.trim();
    match trimmed.strip_prefix("${").and_then(|s| s.strip_suffix('}')) {
        Some(var) => match std::env::var(var) {
            Ok(v) if !v.trim().is_empty() => Ok(v),
            _ => Err(GatewayError::Config(format!(
                "environment variable `{var}` holding the API key is not set"
            ))),
        },
        None if trimmed.is_empty() => Err(GatewayError::Config("api_key is empty".into())),
        None => Ok(trimmed.to_string()),
    }
}

#[derive(Debug)]
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    fn new(cap: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) -> (Permit<'_>, usize) {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        (Permit { limiter: self }, *n)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limiter.in_flight.lock().unwrap() -= 1;
        self.limiter.freed.notify_one();
    }
}

pub struct LiveProvider {
    profile: ProviderProfile,
    api_key: String,
    agent: ureq::Agent,
    limiter: Limiter,
    next_slot: Mutex<Instant>,
    jitter_rng: Mutex<ChaCha8Rng>,
}

enum Attempt {
    Done(ChatResponse),
    Retry(String),
    Fatal(GatewayError),
}

impl LiveProvider {
    /// Resolves the API key up front so a missing secret fails before any request.
    pub fn from_profile(profile: ProviderProfile) -> Result<Self, GatewayError> {
        let api_key = resolve_secret(&profile.api_key)?;
        if profile.endpoint.trim().is_empty() {
            return Err(GatewayError::Config(format!(
                "profile `{}` has no endpoint",
                profile.name
            )));
        }
        if profile.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be >= 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(profile.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            limiter: Limiter::new(profile.max_concurrency),
            api_key,
            agent,
            next_slot: Mutex::new(Instant::now()),
            jitter_rng: Mutex::new(ChaCha8Rng::seed_from_u64(0x5eed)),
            profile,
        })
    }

    pub fn profile(&self) -> &ProviderProfile {
        &self.profile
    }

    fn url(&self) -> String {
        let base = self.profile.endpoint.trim_end_matches('/');
        match self.profile.style {
            ApiStyle::Openai => format!("{base}/chat/completions"),
            ApiStyle::Gemini => format!("{base}/models/{}:generateContent", self.profile.model_id),
        }
    }

    fn body(&self, req: &ChatRequest) -> Value {
        match self.profile.style {
            ApiStyle::Openai => {
                let mut messages = Vec::new();
                if let Some(s) = &req.system_text {
                    messages.push(json!({"role": "system", "content": s}));
                }
                messages.push(json!({"role": "user", "content": req.user_text}));
                let mut body = json!({
                    "model": self.profile.model_id,
                    "messages": messages,
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                });
                if let Some(seed) = req.seed {
                    body["seed"] = json!(seed);
                }
                body
            }
            ApiStyle::Gemini => {
                let mut config = json!({
                    "temperature": req.temperature,
                    "maxOutputTokens": req.max_tokens,
                });
                if let Some(seed) = req.seed {
                    config["seed"] = json!(seed as i64 & 0x7fff_ffff);
                }
                let mut body = json!({
                    "contents": [{"role": "user", "parts": [{"text": req.user_text}]}],
                    "generationConfig": config,
                });
                if let Some(s) = &req.system_text {
                    body["systemInstruction"] = json!({"parts": [{"text": s}]});
                }
                body
            }
        }
    }

    fn extract(&self, v: &Value) -> Result<(String, Option<u32>, Option<u32>), GatewayError> {
        let tok = |v: &Value| v.as_u64().map(|n| n as u32);
        let (text, p, c) = match self.profile.style {
            ApiStyle::Openai => (
                v.pointer("/choices/0/message/content"),
                tok(&v["usage"]["prompt_tokens"]),
                tok(&v["usage"]["completion_tokens"]),
            ),
            ApiStyle::Gemini => (
                v.pointer("/candidates/0/content/parts/0/text"),
                tok(&v["usageMetadata"]["promptTokenCount"]),
                tok(&v["usageMetadata"]["candidatesTokenCount"]),
            ),
        };
        match text {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok((s.clone(), p, c)),
            Some(Value::String(_)) | Some(Value::Null) | None => Err(GatewayError::EmptyResponse),
            Some(other) => Err(GatewayError::Malformed(format!("reply text is {other}"))),
        }
    }

    fn wait_for_rate_slot(&self) {
        let Some(rpm) = self.profile.requests_per_minute.filter(|r| *r > 0) else {
            return;
        };
        let spacing = Duration::from_secs_f64(60.0 / rpm as f64);
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + spacing;
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn attempt(&self, req: &ChatRequest, in_flight: usize, retries: u32) -> Attempt {
        let started = Instant::now();
        let mut call = self.agent.post(&self.url());
        call = match self.profile.style {
            ApiStyle::Openai => call.header("Authorization", &format!("Bearer {}", self.api_key)),
            ApiStyle::Gemini => call.header("x-goog-api-key", &self.api_key),
        };
        let mut resp = match call.send_json(self.body(req)) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(GatewayError::Http { status, body: text });
        }
        let value: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Fatal(GatewayError::Malformed(e.to_string())),
        };
        match self.extract(&value) {
            Ok((text, prompt_tokens, completion_tokens)) => Attempt::Done(ChatResponse {
                text,
                meta: ProviderMeta {
                    latency_ms: started.elapsed().as_millis() as u64,
                    prompt_tokens,
                    completion_tokens,
                    retries,
                    in_flight: in_flight as u32,
                },
            }),
            Err(e) => Attempt::Fatal(e),
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.profile.retry.base_delay(retry);
        if !self.profile.retry.jitter || base.is_zero() {
            return base;
        }
        let factor: f64 = self.jitter_rng.lock().unwrap().random_range(0.5..1.0);
        base.mul_f64(factor)
    }
}

impl ChatProvider for LiveProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let (_permit, in_flight) = self.limiter.acquire();
        let max = self.profile.retry.max_attempts;
        let mut last = String::new();
        for attempt in 1..=max {
            self.wait_for_rate_slot();
            match self.attempt(request, in_flight, attempt - 1) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    tracing::warn!(attempt, %reason, provider = %self.profile.name, "transient provider failure");
                    last = reason;
                    if attempt < max {
                        std::thread::sleep(self.backoff(attempt));
                    }
                }
            }
        }
        Err(GatewayError::Transport { attempts: max, last })
    }

    fn describe(&self) -> String {
        format!("live:{}({})", self.profile.name, self.profile.model_id)
    }
}
