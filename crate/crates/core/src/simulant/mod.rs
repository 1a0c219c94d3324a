//! Simulated clients: incident generation, live conversation state and
//! context variations.

mod conversation;
mod incident;
mod transcript;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmError;
use crate::prompts::PromptError;

pub(crate) use conversation::LIST_MARKER;
pub use conversation::{
    client_completion, client_turn, generate_cues, ClientTurn, CloseReason, ConversationState, ExchangeOutcome,
    Persona, MAX_EXCHANGES, SENTINEL,
};
pub use incident::{
    apply_variation, create_incident, full_matrix, generate_complaint, read_incidents, write_incidents, Behavioral,
    ContextVariation, Incident, Personality,
};
pub use transcript::{ChatTurn, Speaker, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("conversation is closed")]
    Closed,
    #[error("representative message is empty")]
    EmptyMessage,
    #[error("turn text is empty")]
    EmptyTurn,
    #[error("client completion is empty")]
    EmptyReply,
    #[error("turn {index} must be spoken by the {expected:?}")]
    Alternation { index: usize, expected: Speaker },
    #[error("turn at position {position} carries index {index}")]
    BadIndex { position: usize, index: usize },
    #[error("transcript has no client turn")]
    NoClientTurn,
    #[error("incident structure violated: {0}")]
    Structure(String),
    #[error("a variation needs a behavioral or personality context")]
    NoContext,
    #[error("could not parse 2-3 cues: {0}")]
    CueParse(String),
    #[error("unknown {kind} {value:?}")]
    UnknownValue { kind: &'static str, value: String },
    #[error("invalid incident record at line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error(transparent)]
    Prompt(PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl From<PromptError> for SimError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Llm(e) => SimError::Llm(e),
            e => SimError::Prompt(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Airlines,
    Hotels,
    Mobile,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Airlines, Domain::Hotels, Domain::Mobile];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Airlines => "airlines",
            Domain::Hotels => "hotels",
            Domain::Mobile => "mobile",
        }
    }

    /// Name used inside prompts and the example pool.
    pub fn display_name(self) -> &'static str {
        match self {
            Domain::Airlines => "Airline",
            Domain::Hotels => "Hotel",
            Domain::Mobile => "Mobile Network",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ServiceQuality,
    ProductIssues,
    PricingCharges,
    Policy,
    Resolution,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::ServiceQuality,
        Category::ProductIssues,
        Category::PricingCharges,
        Category::Policy,
        Category::Resolution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ServiceQuality => "service_quality",
            Category::ProductIssues => "product_issues",
            Category::PricingCharges => "pricing_charges",
            Category::Policy => "policy",
            Category::Resolution => "resolution",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::ServiceQuality => "Service Quality",
            Category::ProductIssues => "Product Issues",
            Category::PricingCharges => "Pricing and Charges",
            Category::Policy => "Policy",
            Category::Resolution => "Resolution",
        }
    }
}

macro_rules! impl_enum_text {
    ($ty:ty, $kind:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = SimError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| SimError::UnknownValue { kind: $kind, value: s.to_string() })
            }
        }
    };
}

impl_enum_text!(Domain, "domain");
impl_enum_text!(Category, "category");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComplaintSpec {
    pub domain: Domain,
    pub category: Category,
    pub seed: u64,
}

impl ComplaintSpec {
    pub fn new(domain: Domain, category: Category, seed: u64) -> Self {
        Self { domain, category, seed }
    }

    /// `<domain>-<category>-<seed>`, e.g. `airlines-policy-3`.
    pub fn incident_id(&self) -> String {
        format!("{}-{}-{}", self.domain, self.category, self.seed)
    }
}
