//! Per-message lexico-semantic and psycholinguistic metrics.
//!
//! Every metric works on a [`TokenizedText`]. The numeric kernels are generic
//! over [`Real`]; [`metric_vector`] assembles a concrete `f64` [`MetricRow`].

mod embedding;
mod lexicon;
mod tokenize;

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedding::{cosine, EmbeddingTable};
pub use lexicon::{CategoryLexicon, REQUIRED_CATEGORIES};
pub use tokenize::{tokenize, TokenizedText};

use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinguaError {
    #[error("text has no tokens")]
    EmptyText,
    #[error("missing category {0:?}")]
    MissingCategory(String),
    #[error("category {0:?} has no entries")]
    EmptyCategory(String),
    #[error("vector for {token:?} has dimension {found}, expected {expected}")]
    DimensionMismatch { token: String, expected: usize, found: usize },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Categories entering the categorical-dynamic index, with their signs.
pub const CDI_TERMS: [(&str, f64); 8] = [
    ("article", 1.0),
    ("preposition", 1.0),
    ("personal_pronoun", -1.0),
    ("impersonal_pronoun", -1.0),
    ("aux_verb", -1.0),
    ("conjunction", -1.0),
    ("adverb", -1.0),
    ("negation", -1.0),
];

/// Number of words.
pub fn verbosity(text: &TokenizedText) -> usize {
    text.token_count()
}

/// Share of token occurrences that repeat an earlier token.
pub fn repeatability<T: Real>(text: &TokenizedText) -> Result<T, LinguaError> {
    let n = text.token_count();
    if n == 0 {
        return Err(LinguaError::EmptyText);
    }
    let distinct: HashSet<&str> = text.tokens().iter().map(String::as_str).collect();
    Ok(from_usize::<T>(n - distinct.len()) / from_usize(n))
}

/// Coleman–Liau components: letters and sentences per 100 words, and the index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColemanLiau<T> {
    pub letters_per_100: T,
    pub sentences_per_100: T,
    pub index: T,
}

pub fn coleman_liau<T: Real>(text: &TokenizedText) -> Result<ColemanLiau<T>, LinguaError> {
    let n = text.token_count();
    if n == 0 || text.sentence_count() == 0 {
        return Err(LinguaError::EmptyText);
    }
    let hundred = lit::<T>(100.0);
    let words = from_usize::<T>(n);
    let l = from_usize::<T>(text.letter_count()) / words * hundred;
    let s = from_usize::<T>(text.sentence_count()) / words * hundred;
    let index = lit::<T>(0.0588) * l - lit::<T>(0.296) * s - lit::<T>(15.8);
    Ok(ColemanLiau { letters_per_100: l, sentences_per_100: s, index })
}

/// Per-category share of tokens; a token may count toward several categories.
pub fn category_rates<T: Real>(
    text: &TokenizedText,
    lexicon: &CategoryLexicon,
) -> Result<BTreeMap<String, T>, LinguaError> {
    let n = text.token_count();
    if n == 0 {
        return Err(LinguaError::EmptyText);
    }
    let words = from_usize::<T>(n);
    Ok(lexicon
        .category_names()
        .map(|cat| {
            let hits = text.tokens().iter().filter(|t| lexicon.matches(cat, t)).count();
            (cat.to_string(), from_usize::<T>(hits) / words)
        })
        .collect())
}

/// Categorical-dynamic index from category rates given as proportions.
pub fn cdi<T: Real>(rates: &BTreeMap<String, T>) -> Result<T, LinguaError> {
    let mut acc = T::zero();
    for (cat, sign) in CDI_TERMS {
        let rate = rates.get(cat).ok_or_else(|| LinguaError::MissingCategory(cat.to_string()))?;
        acc = acc + lit::<T>(sign) * *rate;
    }
    Ok(lit::<T>(30.0) + lit::<T>(100.0) * acc)
}

/// Cosine similarity between the mean embeddings of two texts; `None` when
/// either text has no in-vocabulary token.
pub fn adaptability<T: Real>(
    incident: &TokenizedText,
    message: &TokenizedText,
    table: &EmbeddingTable<T>,
) -> Option<T> {
    let a = table.document_vector(incident.tokens())?;
    let b = table.document_vector(message.tokens())?;
    cosine(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MessageSource {
    Human,
    Pilot,
    #[default]
    Other,
}

/// Metric vector of one support message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub message_id: String,
    pub source: MessageSource,
    pub verbosity: usize,
    pub repeatability: f64,
    pub cli: f64,
    pub cdi: f64,
    pub adaptability: Option<f64>,
    pub category_rates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_empathy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_reactivity: Option<f64>,
}

/// Externally computed classifier scores for one message.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalScores {
    pub empathy: Option<f64>,
    pub reactivity: Option<f64>,
}

#[derive(Deserialize)]
struct ExternalLine {
    message_id: String,
    #[serde(default)]
    empathy: Option<f64>,
    #[serde(default)]
    reactivity: Option<f64>,
}

/// Reads a JSONL side file of `{"message_id", "empathy", "reactivity"}` records.
pub fn read_external_scores<R: BufRead>(reader: R) -> Result<BTreeMap<String, ExternalScores>, LinguaError> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LinguaError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExternalLine =
            serde_json::from_str(&line).map_err(|e| LinguaError::Parse { line: idx + 1, message: e.to_string() })?;
        out.insert(rec.message_id, ExternalScores { empathy: rec.empathy, reactivity: rec.reactivity });
    }
    Ok(out)
}

/// One support message in a corpus file. Extra fields are ignored, so
/// exported message records can be fed in directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageInput {
    pub message_id: String,
    #[serde(default)]
    pub source: MessageSource,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident_text: Option<String>,
}

/// Parses message JSONL; blank lines are skipped.
pub fn read_messages<R: BufRead>(reader: R) -> Result<Vec<MessageInput>, LinguaError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LinguaError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MessageInput =
            serde_json::from_str(&line).map_err(|e| LinguaError::Parse { line: idx + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// Data needed to compute a [`MetricRow`].
#[derive(Debug, Clone)]
pub struct MetricAssets {
    pub lexicon: CategoryLexicon,
    pub embeddings: Option<EmbeddingTable<f64>>,
    pub external: BTreeMap<String, ExternalScores>,
}

impl Default for MetricAssets {
    fn default() -> Self {
        Self { lexicon: CategoryLexicon::builtin(), embeddings: None, external: BTreeMap::new() }
    }
}

pub fn metric_vector(
    message_id: &str,
    source: MessageSource,
    message: &str,
    incident_text: &str,
    assets: &MetricAssets,
) -> Result<MetricRow, LinguaError> {
    let tokens = tokenize(message);
    if tokens.is_empty() {
        return Err(LinguaError::EmptyText);
    }
    let rates = category_rates::<f64>(&tokens, &assets.lexicon)?;
    let adaptability =
        assets.embeddings.as_ref().and_then(|table| adaptability(&tokenize(incident_text), &tokens, table));
    let external = assets.external.get(message_id).copied().unwrap_or_default();
    Ok(MetricRow {
        message_id: message_id.to_string(),
        source,
        verbosity: verbosity(&tokens),
        repeatability: repeatability(&tokens)?,
        cli: coleman_liau::<f64>(&tokens)?.index,
        cdi: cdi(&rates)?,
        adaptability,
        category_rates: rates,
        external_empathy: external.empathy,
        external_reactivity: external.reactivity,
    })
}
