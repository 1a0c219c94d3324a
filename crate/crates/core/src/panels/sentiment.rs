use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PanelError;
use crate::lingua::tokenize;
use crate::simulant::Transcript;

const SENTIMENT_WINDOW: usize = 3;
const SQUASH_ALPHA: f64 = 15.0;

const NEGATORS: [&str; 14] = [
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere", "without", "cannot", "cant",
    "dont", "wont",
];

fn is_negator(token: &str) -> bool {
    NEGATORS.contains(&token) || token.ends_with("n't")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "scoring", rename_all = "snake_case")]
enum ManifestScoring {
    PerToken,
    ValenceSquash { negation_window: usize },
    HitMean { intensifiers: String },
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestEntry {
    id: String,
    lexicon: String,
    #[serde(flatten)]
    scoring: ManifestScoring,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scoring {
    /// Sum of weights divided by the token count, clamped to [-1, 1].
    PerToken,
    /// Sum with sign flips after a negator in the preceding `negation_window`
    /// tokens, squashed by `s / sqrt(s^2 + 15)`.
    ValenceSquash { negation_window: usize },
    /// Mean over lexicon hits, each scaled by a preceding intensifier.
    HitMean { intensifiers: HashMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconClassifier {
    id: String,
    lexicon: HashMap<String, f64>,
    scoring: Scoring,
}

/// Parses `token<TAB>weight` lines; `#` starts a comment.
pub fn parse_weights(text: &str, origin: &str) -> Result<HashMap<String, f64>, PanelError> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| PanelError::Lexicon { origin: origin.to_string(), line: i + 1, message };
        let (token, weight) = line.split_once('\t').ok_or_else(|| bad("expected token<TAB>weight".into()))?;
        let weight: f64 = weight.trim().parse().map_err(|e| bad(format!("{e}")))?;
        if !weight.is_finite() {
            return Err(bad("weight is not finite".into()));
        }
        out.insert(token.trim().to_lowercase(), weight);
    }
    Ok(out)
}

impl LexiconClassifier {
    pub fn new(id: impl Into<String>, lexicon: HashMap<String, f64>, scoring: Scoring) -> Self {
        Self { id: id.into(), lexicon, scoring }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Polarity in [-1, 1]; 0 when no token is in the lexicon.
    pub fn polarity(&self, text: &str) -> f64 {
        let tokenized = tokenize(text);
        let tokens = tokenized.tokens();
        if tokens.is_empty() {
            return 0.0;
        }
        let score = match &self.scoring {
            Scoring::PerToken => {
                let sum: f64 = tokens.iter().filter_map(|t| self.lexicon.get(t)).sum();
                sum / tokens.len() as f64
            }
            Scoring::ValenceSquash { negation_window } => {
                let mut sum = 0.0;
                for (i, t) in tokens.iter().enumerate() {
                    if let Some(w) = self.lexicon.get(t) {
                        let negated = tokens[i.saturating_sub(*negation_window)..i].iter().any(|p| is_negator(p));
                        sum += if negated { -w } else { *w };
                    }
                }
                sum / (sum * sum + SQUASH_ALPHA).sqrt()
            }
            Scoring::HitMean { intensifiers } => {
                let hits: Vec<f64> = tokens
                    .iter()
                    .enumerate()
                    .filter_map(|(i, t)| {
                        let w = self.lexicon.get(t)?;
                        let boost = i.checked_sub(1).and_then(|p| intensifiers.get(&tokens[p])).copied().unwrap_or(1.0);
                        Some(w * boost)
                    })
                    .collect();
                if hits.is_empty() {
                    0.0
                } else {
                    hits.iter().sum::<f64>() / hits.len() as f64
                }
            }
        };
        score.clamp(-1.0, 1.0)
    }
}

/// Ordered set of polarity classifiers combined by soft voting.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentEnsemble {
    classifiers: Vec<LexiconClassifier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScore {
    pub classifier_id: String,
    pub polarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentLabel {
    pub bin: u8,
    pub mean_polarity: f64,
    pub per_classifier: Vec<ClassifierScore>,
}

impl SentimentEnsemble {
    pub fn new(classifiers: Vec<LexiconClassifier>) -> Result<Self, PanelError> {
        if classifiers.len() < 3 {
            return Err(PanelError::TooFewClassifiers(classifiers.len()));
        }
        Ok(Self { classifiers })
    }

    /// Lexica compiled into the binary.
    pub fn builtin() -> Self {
        let files: HashMap<&str, &str> = [
            ("lexicons/afinn_sum.tsv", include_str!("../../assets/lexicons/afinn_sum.tsv")),
            ("lexicons/valence_negation.tsv", include_str!("../../assets/lexicons/valence_negation.tsv")),
            ("lexicons/subjective_mean.tsv", include_str!("../../assets/lexicons/subjective_mean.tsv")),
            ("lexicons/intensifiers.tsv", include_str!("../../assets/lexicons/intensifiers.tsv")),
        ]
        .into_iter()
        .collect();
        Self::from_manifest_with(include_str!("../../assets/sentiment_manifest.json"), |p| {
            files.get(p).map(|s| s.to_string()).ok_or_else(|| PanelError::Manifest(format!("no builtin file {p}")))
        })
        .expect("shipped sentiment assets are valid")
    }

    /// Loads a manifest whose lexicon paths are relative to `base`.
    pub fn from_manifest(manifest: &Path, base: &Path) -> Result<Self, PanelError> {
        let text = std::fs::read_to_string(manifest)
            .map_err(|e| PanelError::Manifest(format!("{}: {e}", manifest.display())))?;
        Self::from_manifest_with(&text, |p| {
            let path = base.join(p);
            std::fs::read_to_string(&path).map_err(|e| PanelError::Manifest(format!("{}: {e}", path.display())))
        })
    }

    fn from_manifest_with(
        manifest: &str,
        read: impl Fn(&str) -> Result<String, PanelError>,
    ) -> Result<Self, PanelError> {
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(manifest).map_err(|e| PanelError::Manifest(e.to_string()))?;
        let classifiers = entries
            .into_iter()
            .map(|e| {
                let lexicon = parse_weights(&read(&e.lexicon)?, &e.lexicon)?;
                let scoring = match e.scoring {
                    ManifestScoring::PerToken => Scoring::PerToken,
                    ManifestScoring::ValenceSquash { negation_window } => Scoring::ValenceSquash { negation_window },
                    ManifestScoring::HitMean { intensifiers } => {
                        Scoring::HitMean { intensifiers: parse_weights(&read(&intensifiers)?, &intensifiers)? }
                    }
                };
                Ok(LexiconClassifier::new(e.id, lexicon, scoring))
            })
            .collect::<Result<Vec<_>, PanelError>>()?;
        Self::new(classifiers)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.classifiers.iter().map(|c| c.id.as_str())
    }

    pub fn classify_polarity(&self, text: &str, classifier_id: &str) -> Result<f64, PanelError> {
        self.classifiers
            .iter()
            .find(|c| c.id == classifier_id)
            .map(|c| c.polarity(text))
            .ok_or_else(|| PanelError::UnknownClassifier(classifier_id.to_string()))
    }

    /// Soft vote over every classifier for a raw text.
    pub fn label_text(&self, text: &str) -> SentimentLabel {
        let per_classifier: Vec<ClassifierScore> = self
            .classifiers
            .iter()
            .map(|c| ClassifierScore { classifier_id: c.id.clone(), polarity: c.polarity(text) })
            .collect();
        let polarities: Vec<f64> = per_classifier.iter().map(|s| s.polarity).collect();
        let mean_polarity = soft_vote(&polarities);
        SentimentLabel { bin: polarity_bin(mean_polarity), mean_polarity, per_classifier }
    }

    /// Label of the last three client turns.
    pub fn emo_label(&self, history: &Transcript) -> Result<SentimentLabel, PanelError> {
        let client: Vec<&str> = history.client_turns().map(|t| t.text.as_str()).collect();
        if client.is_empty() {
            return Err(PanelError::NoClientTurn);
        }
        let window = client[client.len().saturating_sub(SENTIMENT_WINDOW)..].join("\n");
        Ok(self.label_text(&window))
    }
}

/// Unweighted mean; equal inputs return that value exactly.
pub fn soft_vote(polarities: &[f64]) -> f64 {
    match polarities.split_first() {
        None => 0.0,
        Some((first, rest)) if rest.iter().all(|p| p == first) => *first,
        Some(_) => polarities.iter().sum::<f64>() / polarities.len() as f64,
    }
}

/// Seven equal-width bins over [-1, 1]: `1 + floor((p + 1) / (2/7))`,
/// clamped so that +1 lands in bin 7.
pub fn polarity_bin(p: f64) -> u8 {
    let raw = ((p.clamp(-1.0, 1.0) + 1.0) / (2.0 / 7.0)).floor() as i64 + 1;
    raw.clamp(1, 7) as u8
}
