use serde::{Deserialize, Serialize};

use super::PanelError;
use crate::llm::{self, PromptMessage};
use crate::prompts::{self, TemplateId};
use crate::simulant::{Transcript, LIST_MARKER};
use crate::ChainContext;

const MIN_STEPS: usize = 3;
const MAX_STEPS: usize = 6;
const MAX_STEP_WORDS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuideSteps {
    pub steps: Vec<String>,
}

/// Numbered or bulleted lines of `text`, at most six, each cut to 30 words.
/// `None` when fewer than three list items are found.
pub fn parse_steps(text: &str) -> Option<GuideSteps> {
    let steps: Vec<String> = text
        .lines()
        .filter_map(|line| {
            let marker = LIST_MARKER.find(line)?;
            if line[..marker.end()].trim().is_empty() {
                return None;
            }
            let body = line[marker.end()..].trim();
            (!body.is_empty()).then(|| body.split_whitespace().take(MAX_STEP_WORDS).collect::<Vec<_>>().join(" "))
        })
        .take(MAX_STEPS)
        .collect();
    (steps.len() >= MIN_STEPS).then_some(GuideSteps { steps })
}

/// Troubleshooting steps for the conversation so far; re-prompts once when
/// the completion is not a list.
pub fn info_guide(ctx: &ChainContext, history: &Transcript) -> Result<GuideSteps, PanelError> {
    if history.client_turns().next().is_none() {
        return Err(PanelError::NoClientTurn);
    }
    let conversation = history.format();
    let prompt =
        ctx.assets.prompts.render(TemplateId::InfoGuide, &prompts::bindings([("conversation", &conversation)]))?;
    let messages = [PromptMessage::user(prompt)?];
    for _ in 0..2 {
        if let Some(steps) = parse_steps(&llm::complete(ctx.backend, &messages, ctx.params)?) {
            return Ok(steps);
        }
    }
    Err(PanelError::GuideParse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_list() {
        let g = parse_steps("1. Verify claim number\n2. Check courier status\n3. Offer compensation").unwrap();
        assert_eq!(g.steps, ["Verify claim number", "Check courier status", "Offer compensation"]);
    }

    #[test]
    fn truncates_to_six() {
        let text = (1..=8).map(|i| format!("- step {i}")).collect::<Vec<_>>().join("\n");
        let g = parse_steps(&text).unwrap();
        assert_eq!(g.steps.len(), 6);
        assert_eq!(g.steps[5], "step 6");
    }

    #[test]
    fn prose_is_rejected() {
        assert_eq!(parse_steps("sorry"), None);
        assert_eq!(parse_steps("Here you go:\n1. a\n2. b"), None);
        let long = format!("1) {}\n2) b\n3) c", vec!["w"; 40].join(" "));
        assert_eq!(parse_steps(&long).unwrap().steps[0].split(' ').count(), 30);
    }
}
