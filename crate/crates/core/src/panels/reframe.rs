use serde::{Deserialize, Serialize};

use super::PanelError;
use crate::llm::{self, PromptMessage};
use crate::prompts::{self, TemplateId};
use crate::simulant::Transcript;
use crate::ChainContext;

/// Openers the thought paraphrase is prompted to start with.
pub const PARAPHRASE_STARTERS: [&str; 3] =
    ["You might be thinking", "It might seem like", "It could be that you are feeling"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReframeBundle {
    pub situation: String,
    pub thought: String,
    pub thought_paraphrase: String,
    pub reframe: String,
    pub reframe_paraphrase: String,
}

impl ReframeBundle {
    /// Checks the structural contract a conformant backend must meet.
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("situation", &self.situation),
            ("thought", &self.thought),
            ("thought_paraphrase", &self.thought_paraphrase),
            ("reframe", &self.reframe),
            ("reframe_paraphrase", &self.reframe_paraphrase),
        ] {
            if v.trim().is_empty() {
                return Err(format!("{name} is empty"));
            }
        }
        if !PARAPHRASE_STARTERS.iter().any(|s| self.thought_paraphrase.trim_start().starts_with(s)) {
            return Err("thought_paraphrase does not open with a starter phrase".into());
        }
        if !crate::lingua::tokenize(&self.reframe_paraphrase).tokens().iter().any(|t| t == "you") {
            return Err("reframe_paraphrase is not addressed to \"you\"".into());
        }
        Ok(())
    }
}

fn step(ctx: &ChainContext, name: &str, prompt: String) -> Result<String, PanelError> {
    let messages = [PromptMessage::user(prompt)?];
    for _ in 0..2 {
        let out = llm::complete(ctx.backend, &messages, ctx.params)?;
        let out = out.trim();
        if !out.is_empty() {
            return Ok(out.to_string());
        }
    }
    Err(PanelError::EmptyStep(name.to_string()))
}

/// Situation, thought, thought paraphrase, reframe, reframe paraphrase;
/// five completions when no step comes back blank.
pub fn emo_reframe(ctx: &ChainContext, history: &Transcript) -> Result<ReframeBundle, PanelError> {
    if history.client_turns().next().is_none() {
        return Err(PanelError::NoClientTurn);
    }
    let p = &ctx.assets.prompts;
    let instruction = p.render(TemplateId::Situation, &prompts::bindings([]))?;
    let situation = step(ctx, "situation", format!("{instruction}\n\nChat history:\n{}", history.format()))?;
    let thought =
        step(ctx, "thought", p.render(TemplateId::Thought, &prompts::bindings([("situation", &situation)]))?)?;
    let thought_paraphrase = step(
        ctx,
        "thought_paraphrase",
        p.render(TemplateId::ThoughtParaphrase, &prompts::bindings([("thought", &thought)]))?,
    )?;
    let reframe = step(
        ctx,
        "reframe",
        p.render(TemplateId::Reframe, &prompts::bindings([("situation", &situation), ("thought", &thought)]))?,
    )?;
    let reframe_paraphrase = step(
        ctx,
        "reframe_paraphrase",
        p.render(TemplateId::ReframeParaphrase, &prompts::bindings([("reframe", &reframe)]))?,
    )?;
    Ok(ReframeBundle { situation, thought, thought_paraphrase, reframe, reframe_paraphrase })
}
