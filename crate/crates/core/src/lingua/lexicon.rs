use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::LinguaError;

/// Categories every lexicon must define.
pub const REQUIRED_CATEGORIES: [&str; 16] = [
    "article",
    "preposition",
    "personal_pronoun",
    "impersonal_pronoun",
    "aux_verb",
    "conjunction",
    "adverb",
    "negation",
    "first_singular",
    "first_plural",
    "second_person",
    "third_singular",
    "third_plural",
    "pos_affect",
    "anger",
    "sad",
];

const BUILTIN: &str = include_str!("../../assets/categories.json");

/// One category: exact words plus `stem*` prefix patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct CategoryEntries {
    words: HashSet<String>,
    stems: Vec<String>,
}

impl CategoryEntries {
    fn from_entries(entries: &[String]) -> Self {
        let mut out = Self::default();
        for e in entries {
            let e = e.trim().to_lowercase();
            match e.strip_suffix('*') {
                Some(stem) if !stem.is_empty() => out.stems.push(stem.to_string()),
                Some(_) => {}
                None if !e.is_empty() => {
                    out.words.insert(e);
                }
                None => {}
            }
        }
        out
    }

    fn is_empty(&self) -> bool {
        self.words.is_empty() && self.stems.is_empty()
    }

    fn matches(&self, token: &str) -> bool {
        self.words.contains(token) || self.stems.iter().any(|s| token.starts_with(s.as_str()))
    }
}

/// Word-category dictionary used for category rates and CDI.
///
/// Stored as JSON: `{"category": ["word", "stem*", ...], ...}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLexicon {
    categories: BTreeMap<String, CategoryEntries>,
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct RawLexicon(BTreeMap<String, Vec<String>>);

impl CategoryLexicon {
    /// Builds a lexicon, requiring every category in [`REQUIRED_CATEGORIES`].
    pub fn new(categories: BTreeMap<String, Vec<String>>) -> Result<Self, LinguaError> {
        let lexicon = Self::new_partial(categories);
        for name in REQUIRED_CATEGORIES {
            match lexicon.categories.get(name) {
                None => return Err(LinguaError::MissingCategory(name.to_string())),
                Some(c) if c.is_empty() => return Err(LinguaError::EmptyCategory(name.to_string())),
                Some(_) => {}
            }
        }
        Ok(lexicon)
    }

    /// Builds a lexicon without checking for the required categories.
    pub fn new_partial(categories: BTreeMap<String, Vec<String>>) -> Self {
        let categories =
            categories.into_iter().map(|(name, entries)| (name, CategoryEntries::from_entries(&entries))).collect();
        Self { categories }
    }

    pub fn from_json(text: &str) -> Result<Self, LinguaError> {
        let raw: RawLexicon =
            serde_json::from_str(text).map_err(|e| LinguaError::Parse { line: e.line(), message: e.to_string() })?;
        Self::new(raw.0)
    }

    /// The open function-word lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("builtin category lexicon is valid")
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn contains_category(&self, name: &str) -> bool {
        self.categories.contains_key(name)
    }

    pub fn matches(&self, category: &str, token: &str) -> bool {
        self.categories.get(category).is_some_and(|c| c.matches(token))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_required_categories() {
        let lex = CategoryLexicon::builtin();
        for name in REQUIRED_CATEGORIES {
            assert!(lex.contains_category(name), "{name}");
        }
        assert!(lex.matches("anger", "annoyed"));
        assert!(lex.matches("article", "the"));
        assert!(!lex.matches("article", "then"));
    }

    #[test]
    fn missing_category_rejected() {
        let mut raw: BTreeMap<String, Vec<String>> =
            REQUIRED_CATEGORIES.iter().map(|c| (c.to_string(), vec!["x".to_string()])).collect();
        raw.remove("sad");
        assert_eq!(CategoryLexicon::new(raw.clone()), Err(LinguaError::MissingCategory("sad".into())));
        raw.insert("sad".into(), vec![]);
        assert_eq!(CategoryLexicon::new(raw), Err(LinguaError::EmptyCategory("sad".into())));
    }
}
