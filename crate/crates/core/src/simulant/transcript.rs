use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Client,
    Representative,
}

impl Speaker {
    pub fn other(self) -> Self {
        match self {
            Speaker::Client => Speaker::Representative,
            Speaker::Representative => Speaker::Client,
        }
    }

    /// Label used when a transcript is rendered into a prompt.
    pub fn label(self) -> &'static str {
        match self {
            Speaker::Client => "Customer",
            Speaker::Representative => "Representative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub speaker: Speaker,
    pub text: String,
    pub index: usize,
    /// Microseconds since the Unix epoch; generated incidents leave it unset
    /// so they stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_us: Option<u64>,
}

/// Alternating client/representative turns, starting with the client.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<ChatTurn>", into = "Vec<ChatTurn>")]
pub struct Transcript {
    turns: Vec<ChatTurn>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, speaker: Speaker, text: impl Into<String>) -> Result<(), SimError> {
        self.push_at(speaker, text, None)
    }

    pub fn push_at(
        &mut self,
        speaker: Speaker,
        text: impl Into<String>,
        timestamp_us: Option<u64>,
    ) -> Result<(), SimError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(SimError::EmptyTurn);
        }
        let expected = self.next_speaker();
        if speaker != expected {
            return Err(SimError::Alternation { index: self.turns.len(), expected });
        }
        self.turns.push(ChatTurn { speaker, text, index: self.turns.len(), timestamp_us });
        Ok(())
    }

    pub fn next_speaker(&self) -> Speaker {
        self.turns.last().map_or(Speaker::Client, |t| t.speaker.other())
    }

    pub fn turns(&self) -> &[ChatTurn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn last(&self) -> Option<&ChatTurn> {
        self.turns.last()
    }

    pub fn client_turns(&self) -> impl Iterator<Item = &ChatTurn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::Client)
    }

    /// The first `n` turns.
    pub fn prefix(&self, n: usize) -> Transcript {
        Transcript { turns: self.turns[..n.min(self.turns.len())].to_vec() }
    }

    /// `Customer: ...` / `Representative: ...` lines.
    pub fn format(&self) -> String {
        self.turns.iter().map(|t| format!("{}: {}", t.speaker.label(), t.text)).collect::<Vec<_>>().join("\n")
    }

    /// All turn texts joined by newlines.
    pub fn text(&self) -> String {
        self.turns.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("\n")
    }

    pub fn check_invariants(&self) -> Result<(), SimError> {
        for (i, t) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Speaker::Client } else { Speaker::Representative };
            if t.speaker != expected {
                return Err(SimError::Alternation { index: i, expected });
            }
            if t.index != i {
                return Err(SimError::BadIndex { position: i, index: t.index });
            }
            if t.text.trim().is_empty() {
                return Err(SimError::EmptyTurn);
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<ChatTurn>> for Transcript {
    type Error = SimError;

    fn try_from(turns: Vec<ChatTurn>) -> Result<Self, Self::Error> {
        let t = Transcript { turns };
        t.check_invariants()?;
        Ok(t)
    }
}

impl From<Transcript> for Vec<ChatTurn> {
    fn from(t: Transcript) -> Self {
        t.turns
    }
}
