use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{SimError, Speaker, Transcript};
use crate::llm::{self, PromptMessage};
use crate::prompts::{self, TemplateId};
use crate::ChainContext;

/// Closure marker the simulated client emits.
pub const SENTINEL: &str = "FINISH:999";

/// Hard cap on client/representative exchanges.
pub const MAX_EXCHANGES: u32 = 12;

const MAX_CUE_WORDS: usize = 12;

/// Leading bullet or `1.` / `1)` numbering.
pub(crate) static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])?\s*").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    Civil,
    Uncivil,
}

impl Persona {
    pub fn template(self) -> TemplateId {
        match self {
            Persona::Civil => TemplateId::CivilReply,
            Persona::Uncivil => TemplateId::UncivilReply,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseReason {
    Sentinel,
    TurnCap,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationState {
    transcript: Transcript,
    persona: Persona,
    exchange_count: u32,
    closed: bool,
    close_reason: Option<CloseReason>,
}

impl ConversationState {
    /// Opens a conversation on the client's initial complaint.
    pub fn new(persona: Persona, complaint: &str) -> Result<Self, SimError> {
        Self::new_at(persona, complaint, None)
    }

    pub fn new_at(persona: Persona, complaint: &str, timestamp_us: Option<u64>) -> Result<Self, SimError> {
        let mut transcript = Transcript::new();
        transcript.push_at(Speaker::Client, complaint, timestamp_us)?;
        Ok(Self { transcript, persona, exchange_count: 0, closed: false, close_reason: None })
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn persona(&self) -> Persona {
        self.persona
    }

    pub fn exchange_count(&self) -> u32 {
        self.exchange_count
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn close_reason(&self) -> Option<CloseReason> {
        self.close_reason
    }

    /// Ends an open conversation as resolved.
    pub fn resolve(&self) -> Result<Self, SimError> {
        if self.closed {
            return Err(SimError::Closed);
        }
        Ok(Self { closed: true, close_reason: Some(CloseReason::Resolved), ..self.clone() })
    }

    /// Applies one exchange: the representative message and the parsed
    /// client completion. Pure; `self` is left untouched.
    pub fn apply_exchange(
        &self,
        csr_message: &str,
        outcome: &ExchangeOutcome,
        timestamp_us: Option<u64>,
    ) -> Result<Self, SimError> {
        if self.closed {
            return Err(SimError::Closed);
        }
        if csr_message.trim().is_empty() {
            return Err(SimError::EmptyMessage);
        }
        let mut next = self.clone();
        next.transcript.push_at(Speaker::Representative, csr_message, timestamp_us)?;
        match &outcome.reply {
            Some(reply) => next.transcript.push_at(Speaker::Client, reply.as_str(), timestamp_us)?,
            None if !outcome.sentinel => return Err(SimError::EmptyReply),
            None => {}
        }
        next.exchange_count += 1;
        if outcome.sentinel {
            next.closed = true;
            next.close_reason = Some(CloseReason::Sentinel);
        } else if next.exchange_count >= MAX_EXCHANGES {
            next.closed = true;
            next.close_reason = Some(CloseReason::TurnCap);
        }
        Ok(next)
    }
}

/// A client completion with the closure marker interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeOutcome {
    pub reply: Option<String>,
    pub sentinel: bool,
}

impl ExchangeOutcome {
    /// Everything from the first sentinel on is dropped; the text before it
    /// is kept when non-blank.
    pub fn parse(completion: &str) -> Self {
        let trimmed = completion.trim();
        match trimmed.find(SENTINEL) {
            Some(pos) => {
                let before = trimmed[..pos].trim().trim_matches(|c: char| c == '"' || c == '\'' || c.is_whitespace());
                ExchangeOutcome { reply: (!before.is_empty()).then(|| before.to_string()), sentinel: true }
            }
            None => ExchangeOutcome { reply: (!trimmed.is_empty()).then(|| trimmed.to_string()), sentinel: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientTurn {
    pub reply: Option<String>,
    pub state: ConversationState,
}

/// Obtains the raw client completion for a representative message.
pub fn client_completion(ctx: &ChainContext, state: &ConversationState, csr_message: &str) -> Result<String, SimError> {
    if state.closed {
        return Err(SimError::Closed);
    }
    if csr_message.trim().is_empty() {
        return Err(SimError::EmptyMessage);
    }
    let question =
        prompts::contextualize_history(&ctx.assets.prompts, &state.transcript, csr_message, ctx.backend, ctx.params)?;
    let prompt = ctx.assets.prompts.render(state.persona.template(), &prompts::bindings([("question", &question)]))?;
    Ok(llm::complete(ctx.backend, &[PromptMessage::user(prompt)?], ctx.params)?)
}

/// Runs one exchange: the representative says `csr_message`, the simulated
/// client answers.
pub fn client_turn(ctx: &ChainContext, state: &ConversationState, csr_message: &str) -> Result<ClientTurn, SimError> {
    let completion = client_completion(ctx, state, csr_message)?;
    let outcome = ExchangeOutcome::parse(&completion);
    let state = state.apply_exchange(csr_message, &outcome, None)?;
    Ok(ClientTurn { reply: outcome.reply, state })
}

fn parse_cues(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| {
            let l = LIST_MARKER.replace(l, "");
            let l = l.trim_matches(|c: char| c == '"' || c.is_whitespace());
            l.split_whitespace().take(MAX_CUE_WORDS).collect::<Vec<_>>().join(" ")
        })
        .filter(|l| !l.is_empty() && !l.contains(SENTINEL))
        .take(3)
        .collect()
}

/// Suggests 2 or 3 short reply openers for the latest client message.
pub fn generate_cues(ctx: &ChainContext, state: &ConversationState) -> Result<Vec<String>, SimError> {
    if state.closed {
        return Err(SimError::Closed);
    }
    let t = &state.transcript;
    let latest = t.client_turns().last().ok_or(SimError::NoClientTurn)?;
    let question = prompts::contextualize_history(
        &ctx.assets.prompts,
        &t.prefix(latest.index),
        &latest.text,
        ctx.backend,
        ctx.params,
    )?;
    let prompt = ctx.assets.prompts.render(TemplateId::ResponseCues, &prompts::bindings([("question", &question)]))?;
    let messages = [PromptMessage::user(prompt)?];
    let mut last = String::new();
    for _ in 0..2 {
        last = llm::complete(ctx.backend, &messages, ctx.params)?;
        let cues = parse_cues(&last);
        if cues.len() >= 2 {
            return Ok(cues);
        }
    }
    Err(SimError::CueParse(format!("{} usable line(s)", parse_cues(&last).len())))
}
