//! Chat-completion gateway.
//!
//! Every prompt chain talks to a [`ChatBackend`]. Two backends ship: a
//! remote OpenAI-compatible endpoint and a deterministic scripted backend
//! that maps regex matchers over the user content to canned responses.

mod remote;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::RemoteBackend;

/// Response of the scripted backend when no matcher applies.
pub const UNMATCHED: &str = "UNMATCHED";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("credentials rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("response has no completion: {0}")]
    MalformedResponse(String),
    #[error("HTTP {status} after {attempts} attempt(s)")]
    Http { status: u16, attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub role: Role,
    pub content: String,
}

impl PromptMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Result<Self, LlmError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(LlmError::InvalidRequest("message content is empty".into()));
        }
        Ok(Self { role, content })
    }

    pub fn system(content: impl Into<String>) -> Result<Self, LlmError> {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Result<Self, LlmError> {
        Self::new(Role::User, content)
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    #[serde(rename = "timeout_ms", with = "duration_ms")]
    pub timeout: Duration,
    pub retries: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self { temperature: 0.7, max_tokens: 512, seed: None, timeout: Duration::from_secs(60), retries: 3 }
    }
}

impl CompletionParams {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        if self.retries > 5 {
            return Err(LlmError::InvalidRequest(format!("retries {} exceeds 5", self.retries)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// A chat-completion provider.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[PromptMessage], params: &CompletionParams) -> Result<String, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn complete(&self, messages: &[PromptMessage], params: &CompletionParams) -> Result<String, LlmError> {
        (**self).complete(messages, params)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, messages: &[PromptMessage], params: &CompletionParams) -> Result<String, LlmError> {
        (**self).complete(messages, params)
    }
}

/// Validates the request and forwards it to `backend`.
pub fn complete<B: ChatBackend + ?Sized>(
    backend: &B,
    messages: &[PromptMessage],
    params: &CompletionParams,
) -> Result<String, LlmError> {
    if messages.is_empty() {
        return Err(LlmError::InvalidRequest("no messages".into()));
    }
    if let Some(m) = messages.iter().find(|m| m.content.trim().is_empty()) {
        return Err(LlmError::InvalidRequest(format!("empty {:?} message", m.role)));
    }
    params.validate()?;
    backend.complete(messages, params)
}

/// Concatenation of the user-role contents, newline separated.
pub fn user_content(messages: &[PromptMessage]) -> String {
    messages.iter().filter(|m| m.role == Role::User).map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Regular expression searched for in the concatenated user content.
    pub matcher: String,
    pub response: String,
}

impl ScriptRule {
    pub fn new(matcher: impl Into<String>, response: impl Into<String>) -> Self {
        Self { matcher: matcher.into(), response: response.into() }
    }
}

/// Deterministic backend: the first rule whose matcher finds a match wins.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Vec<(Regex, String)>,
}

impl ScriptedBackend {
    pub fn new(rules: &[ScriptRule]) -> Result<Self, LlmError> {
        let rules = rules
            .iter()
            .map(|r| {
                Regex::new(&r.matcher)
                    .map(|re| (re, r.response.clone()))
                    .map_err(|e| LlmError::InvalidConfig(format!("bad matcher {:?}: {e}", r.matcher)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    /// Parses a JSON array of `{"matcher", "response"}` objects.
    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let rules: Vec<ScriptRule> =
            serde_json::from_str(text).map_err(|e| LlmError::InvalidConfig(format!("script: {e}")))?;
        Self::new(&rules)
    }

    pub fn respond(&self, user_content: &str) -> &str {
        self.rules.iter().find(|(re, _)| re.is_match(user_content)).map_or(UNMATCHED, |(_, response)| response.as_str())
    }
}

/// Script answering every shipped prompt with fixed, conformant text.
pub fn demo_script() -> Vec<ScriptRule> {
    serde_json::from_str(include_str!("../../assets/demo_script.json")).expect("shipped demo script is valid")
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[PromptMessage], _params: &CompletionParams) -> Result<String, LlmError> {
        Ok(self.respond(&user_content(messages)).to_string())
    }
}

/// Backend backed by a closure; handy for stateful test doubles.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&[PromptMessage], &CompletionParams) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, messages: &[PromptMessage], params: &CompletionParams) -> Result<String, LlmError> {
        (self.0)(messages, params)
    }
}

/// Wraps a backend and counts completed calls.
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for CountingBackend<B> {
    fn complete(&self, messages: &[PromptMessage], params: &CompletionParams) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(messages, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Model name sent to the remote endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<ScriptRule>>,
}

impl BackendConfig {
    pub fn scripted(script: Vec<ScriptRule>) -> Self {
        Self { kind: BackendKind::Scripted, endpoint_url: None, api_key_env: None, model: None, script: Some(script) }
    }

    pub fn remote(endpoint_url: impl Into<String>, api_key_env: Option<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint_url: Some(endpoint_url.into()),
            api_key_env,
            model: None,
            script: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.kind {
            BackendKind::Remote if self.endpoint_url.is_none() => {
                Err(LlmError::InvalidConfig("remote backend needs endpoint_url".into()))
            }
            BackendKind::Scripted if self.script.is_none() => {
                Err(LlmError::InvalidConfig("scripted backend needs a script".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn ChatBackend>, LlmError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Scripted => Arc::new(ScriptedBackend::new(self.script.as_deref().unwrap_or_default())?),
            BackendKind::Remote => Arc::new(RemoteBackend::from_config(self)?),
        })
    }
}
