use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    Complaint,
    Thought,
    Reframe,
}

impl ExampleKind {
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            ExampleKind::Complaint => &["category", "domain", "complaint"],
            ExampleKind::Thought => &["situation", "thought"],
            ExampleKind::Reframe => &["situation", "thought", "reframe"],
        }
    }

    fn builtin_jsonl(self) -> &'static str {
        match self {
            ExampleKind::Complaint => include_str!("../../assets/examples/complaint.jsonl"),
            ExampleKind::Thought => include_str!("../../assets/examples/thought.jsonl"),
            ExampleKind::Reframe => include_str!("../../assets/examples/reframe.jsonl"),
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ExampleKind::Complaint => "complaint.jsonl",
            ExampleKind::Thought => "thought.jsonl",
            ExampleKind::Reframe => "reframe.jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    kind: ExampleKind,
    payload: BTreeMap<String, String>,
    source_id: String,
}

impl FewShotExample {
    pub fn new(
        kind: ExampleKind,
        payload: BTreeMap<String, String>,
        source_id: impl Into<String>,
    ) -> Result<Self, String> {
        let expected: BTreeSet<&str> = kind.fields().iter().copied().collect();
        let got: BTreeSet<&str> = payload.keys().map(String::as_str).collect();
        if expected != got {
            return Err(format!("{kind:?} example needs fields {expected:?}, got {got:?}"));
        }
        if let Some((k, _)) = payload.iter().find(|(_, v)| v.trim().is_empty()) {
            return Err(format!("field {k} is empty"));
        }
        Ok(Self { kind, payload, source_id: source_id.into() })
    }

    pub fn kind(&self) -> ExampleKind {
        self.kind
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.payload.get(name).map(String::as_str)
    }

    pub fn payload(&self) -> &BTreeMap<String, String> {
        &self.payload
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExamplePool {
    kind: ExampleKind,
    examples: Vec<FewShotExample>,
    pub selection_seed: u64,
}

impl ExamplePool {
    pub fn new(kind: ExampleKind, examples: Vec<FewShotExample>, selection_seed: u64) -> Result<Self, PromptError> {
        if examples.is_empty() {
            return Err(PromptError::EmptyPool);
        }
        if let Some(pos) = examples.iter().position(|e| e.kind != kind) {
            return Err(PromptError::InvalidExample {
                line: pos + 1,
                message: "example kind differs from pool".into(),
            });
        }
        Ok(Self { kind, examples, selection_seed })
    }

    /// One JSON object per line. Unknown keys other than `source_id` are
    /// rejected; a missing `source_id` becomes `<kind>-<line>`.
    pub fn from_jsonl<R: BufRead>(kind: ExampleKind, reader: R, selection_seed: u64) -> Result<Self, PromptError> {
        let mut examples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| PromptError::InvalidExample { line: lineno, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut obj: BTreeMap<String, String> = serde_json::from_str(&line)
                .map_err(|e| PromptError::InvalidExample { line: lineno, message: e.to_string() })?;
            let source_id = obj.remove("source_id").unwrap_or_else(|| format!("{}-{lineno:02}", kind.file_name()));
            let example = FewShotExample::new(kind, obj, source_id)
                .map_err(|message| PromptError::InvalidExample { line: lineno, message })?;
            examples.push(example);
        }
        Self::new(kind, examples, selection_seed)
    }

    pub fn builtin(kind: ExampleKind, selection_seed: u64) -> Self {
        Self::from_jsonl(kind, kind.builtin_jsonl().as_bytes(), selection_seed).expect("shipped example pool is valid")
    }

    pub fn kind(&self) -> ExampleKind {
        self.kind
    }

    pub fn examples(&self) -> &[FewShotExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn with_seed(&self, selection_seed: u64) -> Self {
        Self { selection_seed, ..self.clone() }
    }
}

/// Draws `count` examples satisfying every `(field, value)` constraint.
///
/// Candidates are shuffled with a ChaCha8 stream seeded by the pool's
/// selection seed. Complaint picks are then greedy: each step takes the
/// first candidate that adds an unseen category, then an unseen domain.
pub fn sample_examples(
    pool: &ExamplePool,
    count: usize,
    constraints: &[(&str, &str)],
) -> Result<Vec<FewShotExample>, PromptError> {
    if count == 0 {
        return Err(PromptError::ZeroCount);
    }
    let mut candidates: Vec<&FewShotExample> =
        pool.examples.iter().filter(|e| constraints.iter().all(|(k, v)| e.field(k) == Some(*v))).collect();
    if count > candidates.len() {
        return Err(PromptError::InsufficientExamples { requested: count, available: candidates.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pool.selection_seed);
    candidates.shuffle(&mut rng);
    if pool.kind != ExampleKind::Complaint {
        return Ok(candidates.into_iter().take(count).cloned().collect());
    }

    let mut categories = BTreeSet::new();
    let mut domains = BTreeSet::new();
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let score = |e: &FewShotExample| {
            let cat = e.field("category").unwrap_or_default();
            let dom = e.field("domain").unwrap_or_default();
            (!categories.contains(cat), !domains.contains(dom))
        };
        // max_by_key keeps the last maximum; reverse so ties go to shuffle order
        let (idx, _) = candidates.iter().enumerate().rev().max_by_key(|(_, e)| score(e)).expect("candidates remain");
        let e = candidates.remove(idx);
        categories.insert(e.field("category").unwrap_or_default());
        domains.insert(e.field("domain").unwrap_or_default());
        picked.push(e.clone());
    }
    Ok(picked)
}
