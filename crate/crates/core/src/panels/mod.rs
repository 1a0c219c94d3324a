//! Assistance panels shown beside a live conversation.

mod guide;
mod reframe;
mod sentiment;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmError;
use crate::prompts::PromptError;
use crate::simulant::Transcript;

pub use guide::{info_guide, parse_steps, GuideSteps};
pub use reframe::{emo_reframe, ReframeBundle, PARAPHRASE_STARTERS};
pub use sentiment::{
    parse_weights, polarity_bin, soft_vote, ClassifierScore, LexiconClassifier, Scoring, SentimentEnsemble,
    SentimentLabel,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PanelError {
    #[error("history has no client turn")]
    NoClientTurn,
    #[error("step {0} returned an empty completion twice")]
    EmptyStep(String),
    #[error("unknown classifier {0:?}")]
    UnknownClassifier(String),
    #[error("ensemble needs at least 3 classifiers, got {0}")]
    TooFewClassifiers(usize),
    #[error("completion is not a list of 3 to 6 steps")]
    GuideParse,
    #[error("{origin} line {line}: {message}")]
    Lexicon { origin: String, line: usize, message: String },
    #[error("sentiment manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Prompt(PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl From<PromptError> for PanelError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Llm(e) => PanelError::Llm(e),
            e => PanelError::Prompt(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelId {
    InfoGuide,
    EmoLabel,
    EmoReframe,
}

impl PanelId {
    pub const ALL: [PanelId; 3] = [PanelId::InfoGuide, PanelId::EmoLabel, PanelId::EmoReframe];

    pub fn as_str(self) -> &'static str {
        match self {
            PanelId::InfoGuide => "info_guide",
            PanelId::EmoLabel => "emo_label",
            PanelId::EmoReframe => "emo_reframe",
        }
    }
}

impl fmt::Display for PanelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PanelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown panel {s:?}"))
    }
}

/// Payload of one panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "panel", rename_all = "snake_case")]
pub enum PanelPayload {
    InfoGuide(GuideSteps),
    EmoLabel(SentimentLabel),
    EmoReframe(ReframeBundle),
}

impl PanelPayload {
    pub fn id(&self) -> PanelId {
        match self {
            PanelPayload::InfoGuide(_) => PanelId::InfoGuide,
            PanelPayload::EmoLabel(_) => PanelId::EmoLabel,
            PanelPayload::EmoReframe(_) => PanelId::EmoReframe,
        }
    }
}

/// Computes panel `id` for the conversation so far.
pub fn compute_panel(ctx: &crate::ChainContext, id: PanelId, history: &Transcript) -> Result<PanelPayload, PanelError> {
    Ok(match id {
        PanelId::InfoGuide => PanelPayload::InfoGuide(info_guide(ctx, history)?),
        PanelId::EmoLabel => PanelPayload::EmoLabel(ctx.assets.sentiment.emo_label(history)?),
        PanelId::EmoReframe => PanelPayload::EmoReframe(emo_reframe(ctx, history)?),
    })
}
