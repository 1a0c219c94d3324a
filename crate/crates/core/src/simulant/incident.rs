use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    client_completion, ComplaintSpec, ConversationState, ExchangeOutcome, Persona, SimError, Speaker, Transcript,
};
use crate::llm::{self, PromptMessage};
use crate::prompts::{self, sample_examples, TemplateId};
use crate::ChainContext;

const INCIDENT_TURNS: usize = 5;
const COMPLAINT_SHOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavioral {
    Focused,
    Stressed,
    Bored,
}

impl Behavioral {
    pub const ALL: [Behavioral; 3] = [Behavioral::Focused, Behavioral::Stressed, Behavioral::Bored];

    pub fn text(self) -> &'static str {
        match self {
            Behavioral::Focused => {
                "The conversation takes place about 2 hours into the work shift. The representative has already addressed a few customer complaints before the following incident."
            }
            Behavioral::Stressed => {
                "The conversation takes place in the second half of the work shift. The representative has been working longer hours over the past few days and has not been taking breaks."
            }
            Behavioral::Bored => {
                "The conversation takes place in the middle of the work shift. The representative has been spending minimal time on tasks and has been regularly checking their personal messages."
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Personality {
    Resilient,
    Undercontrolled,
    Overcontrolled,
}

impl Personality {
    pub const ALL: [Personality; 3] =
        [Personality::Resilient, Personality::Undercontrolled, Personality::Overcontrolled];

    pub fn text(self) -> &'static str {
        match self {
            Personality::Resilient => {
                "They are organized and dependable. They tend to remain composed when facing challenges, but are prone to setting unrealistic expectations."
            }
            Personality::Undercontrolled => {
                "They are outgoing, competitive, and high energy. They tend to work on impulse, but are also prone to frustration."
            }
            Personality::Overcontrolled => {
                "They are detail-oriented and reliable but might appear distant. They tend to work carefully, but are prone to overthinking."
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextVariation {
    pub behavioral: Option<Behavioral>,
    pub personality: Option<Personality>,
    pub rendered_text: String,
}

impl ContextVariation {
    pub fn new(behavioral: Option<Behavioral>, personality: Option<Personality>) -> Result<Self, SimError> {
        let parts: Vec<&str> =
            behavioral.map(Behavioral::text).into_iter().chain(personality.map(Personality::text)).collect();
        if parts.is_empty() {
            return Err(SimError::NoContext);
        }
        Ok(Self { behavioral, personality, rendered_text: parts.join(" ") })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incident {
    pub spec: ComplaintSpec,
    pub variation: Option<ContextVariation>,
    #[serde(rename = "turns")]
    pub transcript: Transcript,
}

impl Incident {
    pub fn id(&self) -> String {
        self.spec.incident_id()
    }

    pub fn check(&self) -> Result<(), SimError> {
        self.transcript.check_invariants()?;
        if self.transcript.len() != INCIDENT_TURNS {
            return Err(SimError::Structure(format!("{} turns instead of {INCIDENT_TURNS}", self.transcript.len())));
        }
        Ok(())
    }
}

/// Returns a copy of `incident` carrying the requested context.
pub fn apply_variation(
    incident: &Incident,
    behavioral: Option<Behavioral>,
    personality: Option<Personality>,
) -> Result<Incident, SimError> {
    Ok(Incident { variation: Some(ContextVariation::new(behavioral, personality)?), ..incident.clone() })
}

/// Complaint prompt with its exemplar block replaced by examples drawn
/// from the complaint pool under the spec's seed.
fn complaint_prompt(ctx: &ChainContext, spec: &ComplaintSpec) -> Result<String, SimError> {
    let rendered = ctx.assets.prompts.render(
        TemplateId::ComplaintInit,
        &prompts::bindings([("category", spec.category.display_name()), ("domain", spec.domain.display_name())]),
    )?;
    let pool = ctx.assets.complaints.with_seed(spec.seed);
    let shots = sample_examples(&pool, COMPLAINT_SHOTS.min(pool.len()), &[])?;
    let block = shots
        .iter()
        .map(|e| {
            format!(
                "Category: {}\nDomain: {}\nComplaint: {}\\\n",
                e.field("category").unwrap_or_default(),
                e.field("domain").unwrap_or_default(),
                e.field("complaint").unwrap_or_default().trim()
            )
        })
        .collect::<Vec<_>>()
        .join("\n...\n\n");
    let target = format!("Category: {}\nDomain: {}", spec.category.display_name(), spec.domain.display_name());
    let (Some(start), Some(end)) = (rendered.find("Category: "), rendered.rfind(&target)) else {
        return Ok(rendered);
    };
    if start >= end {
        return Ok(rendered);
    }
    Ok(format!("{}{block}\n{}", &rendered[..start], &rendered[end..]))
}

fn clean(text: &str) -> String {
    text.trim().trim_matches('"').trim().to_string()
}

/// Calls `f` up to twice until it yields an acceptable value.
fn twice<T>(what: &str, mut f: impl FnMut() -> Result<Option<T>, SimError>) -> Result<T, SimError> {
    for _ in 0..2 {
        if let Some(v) = f()? {
            return Ok(v);
        }
    }
    Err(SimError::Structure(what.to_string()))
}

/// Initial complaint for `spec`, generated under the spec's seed.
pub fn generate_complaint(ctx: &ChainContext, spec: &ComplaintSpec) -> Result<String, SimError> {
    let params = ctx.params.clone().with_seed(spec.seed);
    let ctx = ChainContext { params: &params, ..*ctx };
    let prompt = complaint_prompt(&ctx, spec)?;
    twice("complaint is empty or closes the conversation", || {
        let c = clean(&llm::complete(ctx.backend, &[PromptMessage::user(prompt.clone())?], ctx.params)?);
        Ok((!c.is_empty() && !c.contains(super::SENTINEL)).then_some(c))
    })
}

/// Generates a 5-turn incident: complaint, then two representative/client
/// exchanges with the uncivil persona.
pub fn create_incident(ctx: &ChainContext, spec: ComplaintSpec) -> Result<Incident, SimError> {
    let complaint = generate_complaint(ctx, &spec)?;
    let params = ctx.params.clone().with_seed(spec.seed);
    let ctx = ChainContext { params: &params, ..*ctx };
    let mut state = ConversationState::new(Persona::Uncivil, &complaint)?;

    while state.transcript().len() < INCIDENT_TURNS {
        let t = state.transcript();
        let last = t.last().expect("transcript starts with the complaint");
        let question = prompts::contextualize_history(
            &ctx.assets.prompts,
            &t.prefix(t.len() - 1),
            &last.text,
            ctx.backend,
            ctx.params,
        )?;
        let rep_prompt = ctx
            .assets
            .prompts
            .render(TemplateId::RepresentativeReply, &prompts::bindings([("question", &question)]))?;
        let rep = twice("representative reply is empty", || {
            let r = clean(&llm::complete(ctx.backend, &[PromptMessage::user(rep_prompt.clone())?], ctx.params)?);
            Ok((!r.is_empty() && !r.contains(super::SENTINEL)).then_some(r))
        })?;
        let index = state.transcript().len() + 1;
        let outcome = twice(&format!("client closed the conversation at turn {index}"), || {
            let o = ExchangeOutcome::parse(&client_completion(&ctx, &state, &rep)?);
            Ok((!o.sentinel && o.reply.is_some()).then_some(o))
        })?;
        state = state.apply_exchange(&rep, &outcome, None)?;
    }
    let incident = Incident { spec, variation: None, transcript: state.transcript().clone() };
    debug_assert!(incident.check().is_ok());
    debug_assert_eq!(incident.transcript.last().map(|t| t.speaker), Some(Speaker::Client));
    Ok(incident)
}

/// Every domain x category combination for `seeds`, in domain, category,
/// seed order.
pub fn full_matrix(seeds: impl IntoIterator<Item = u64> + Clone) -> Vec<ComplaintSpec> {
    let mut out = Vec::new();
    for domain in super::Domain::ALL {
        for category in super::Category::ALL {
            for seed in seeds.clone() {
                out.push(ComplaintSpec::new(domain, category, seed));
            }
        }
    }
    out
}

pub fn write_incidents<W: Write>(mut w: W, incidents: &[Incident]) -> std::io::Result<()> {
    for i in incidents {
        serde_json::to_writer(&mut w, i)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses incident JSONL; blank lines are skipped.
pub fn read_incidents<R: BufRead>(r: R) -> Result<Vec<Incident>, SimError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| SimError::InvalidRecord { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let incident: Incident =
            serde_json::from_str(&line).map_err(|e| SimError::InvalidRecord { line: i + 1, message: e.to_string() })?;
        out.push(incident);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variation_texts() {
        let v = ContextVariation::new(Some(Behavioral::Focused), None).unwrap();
        assert!(v.rendered_text.starts_with("The conversation takes place about 2 hours into the work shift"));
        let v = ContextVariation::new(None, Some(Personality::Resilient)).unwrap();
        assert!(v.rendered_text.starts_with("They are organized and dependable"));
        let v = ContextVariation::new(Some(Behavioral::Bored), Some(Personality::Overcontrolled)).unwrap();
        assert_eq!(v.rendered_text, format!("{} {}", Behavioral::Bored.text(), Personality::Overcontrolled.text()));
        assert_eq!(ContextVariation::new(None, None), Err(SimError::NoContext));
    }

    #[test]
    fn matrix_size() {
        let m = full_matrix(0..3);
        assert_eq!(m.len(), 45);
        assert_eq!(m[0].incident_id(), "airlines-service_quality-0");
    }
}
