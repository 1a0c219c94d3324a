//! Prompt templates, few-shot example pools and history contextualization.

mod pool;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{self, ChatBackend, CompletionParams, LlmError, PromptMessage};
use crate::simulant::Transcript;

pub use pool::{sample_examples, ExampleKind, ExamplePool, FewShotExample};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("requested {requested} examples, only {available} available")]
    InsufficientExamples { requested: usize, available: usize },
    #[error("example count must be positive")]
    ZeroCount,
    #[error("invalid example at line {line}: {message}")]
    InvalidExample { line: usize, message: String },
    #[error("example pool is empty")]
    EmptyPool,
    #[error("latest message is empty")]
    EmptyLatest,
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ComplaintInit,
    UncivilReply,
    CivilReply,
    RepresentativeReply,
    HistoryContextualize,
    Situation,
    Thought,
    ThoughtParaphrase,
    Reframe,
    ReframeParaphrase,
    InfoGuide,
    ResponseCues,
}

impl TemplateId {
    pub const ALL: [TemplateId; 12] = [
        TemplateId::ComplaintInit,
        TemplateId::UncivilReply,
        TemplateId::CivilReply,
        TemplateId::RepresentativeReply,
        TemplateId::HistoryContextualize,
        TemplateId::Situation,
        TemplateId::Thought,
        TemplateId::ThoughtParaphrase,
        TemplateId::Reframe,
        TemplateId::ReframeParaphrase,
        TemplateId::InfoGuide,
        TemplateId::ResponseCues,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ComplaintInit => "complaint_init",
            TemplateId::UncivilReply => "uncivil_reply",
            TemplateId::CivilReply => "civil_reply",
            TemplateId::RepresentativeReply => "representative_reply",
            TemplateId::HistoryContextualize => "history_contextualize",
            TemplateId::Situation => "situation",
            TemplateId::Thought => "thought",
            TemplateId::ThoughtParaphrase => "thought_paraphrase",
            TemplateId::Reframe => "reframe",
            TemplateId::ReframeParaphrase => "reframe_paraphrase",
            TemplateId::InfoGuide => "info_guide",
            TemplateId::ResponseCues => "response_cues",
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateId::ComplaintInit => include_str!("../../assets/prompts/complaint_init.txt"),
            TemplateId::UncivilReply => include_str!("../../assets/prompts/uncivil_reply.txt"),
            TemplateId::CivilReply => include_str!("../../assets/prompts/civil_reply.txt"),
            TemplateId::RepresentativeReply => include_str!("../../assets/prompts/representative_reply.txt"),
            TemplateId::HistoryContextualize => include_str!("../../assets/prompts/history_contextualize.txt"),
            TemplateId::Situation => include_str!("../../assets/prompts/situation.txt"),
            TemplateId::Thought => include_str!("../../assets/prompts/thought.txt"),
            TemplateId::ThoughtParaphrase => include_str!("../../assets/prompts/thought_paraphrase.txt"),
            TemplateId::Reframe => include_str!("../../assets/prompts/reframe.txt"),
            TemplateId::ReframeParaphrase => include_str!("../../assets/prompts/reframe_paraphrase.txt"),
            TemplateId::InfoGuide => include_str!("../../assets/prompts/info_guide.txt"),
            TemplateId::ResponseCues => include_str!("../../assets/prompts/response_cues.txt"),
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
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: TemplateId,
    body: String,
    required_bindings: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(id: TemplateId, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_bindings = PLACEHOLDER.captures_iter(&body).map(|c| c[1].to_string()).collect();
        Self { id, body, required_bindings }
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required_bindings(&self) -> &BTreeSet<String> {
        &self.required_bindings
    }

    /// Substitutes every `{name}` in a single pass. Bound values are not
    /// rescanned, so braces inside them survive untouched.
    pub fn render(&self, bindings: &BTreeMap<&str, &str>) -> Result<String, PromptError> {
        if let Some(missing) = self.required_bindings.iter().find(|k| !bindings.contains_key(k.as_str())) {
            return Err(PromptError::MissingBinding(missing.clone()));
        }
        Ok(PLACEHOLDER.replace_all(&self.body, |c: &regex::Captures| bindings[&c[1]].to_string()).into_owned())
    }
}

/// All templates, keyed by id.
#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl PromptRegistry {
    /// Templates compiled into the binary.
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL.iter().map(|&id| (id, PromptTemplate::new(id, id.builtin_body()))).collect();
        Self { templates }
    }

    /// Loads `<dir>/<id>.txt` for every id, keeping the builtin body for
    /// files that do not exist.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut reg = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{id}.txt"));
            if path.exists() {
                let body = std::fs::read_to_string(&path)
                    .map_err(|e| PromptError::Io { path: path.display().to_string(), message: e.to_string() })?;
                reg.templates.insert(id, PromptTemplate::new(id, body));
            }
        }
        Ok(reg)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &BTreeMap<&str, &str>) -> Result<String, PromptError> {
        self.get(id).render(bindings)
    }

    /// Looks a template up by its string id.
    pub fn render_named(&self, id: &str, bindings: &BTreeMap<&str, &str>) -> Result<String, PromptError> {
        self.render(id.parse()?, bindings)
    }
}

impl Default for PromptRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Builds a binding map from `(name, value)` pairs.
pub fn bindings<'a, const N: usize>(pairs: [(&'a str, &'a str); N]) -> BTreeMap<&'a str, &'a str> {
    pairs.into_iter().collect()
}

/// Rewrites `latest` into a question that stands without the history.
/// An empty history returns `latest` untouched and makes no backend call.
pub fn contextualize_history<B: ChatBackend + ?Sized>(
    registry: &PromptRegistry,
    history: &Transcript,
    latest: &str,
    backend: &B,
    params: &CompletionParams,
) -> Result<String, PromptError> {
    if latest.trim().is_empty() {
        return Err(PromptError::EmptyLatest);
    }
    if history.is_empty() {
        return Ok(latest.to_string());
    }
    let instruction = registry.render(TemplateId::HistoryContextualize, &BTreeMap::new())?;
    let prompt = format!("{instruction}\n\nChat history:\n{}\n\nLatest question: {latest}", history.format());
    let out = llm::complete(backend, &[PromptMessage::user(prompt)?], params)?;
    let out = out.trim();
    Ok(if out.is_empty() { latest.to_string() } else { out.to_string() })
}
