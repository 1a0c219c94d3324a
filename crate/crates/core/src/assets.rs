//! Loading of prompts, example pools, lexica and sentiment data.
//!
//! Layout of an asset directory (every file optional, missing files fall
//! back to the copies compiled into the crate):
//!
//! ```text
//! prompts/<template id>.txt
//! examples/{complaint,thought,reframe}.jsonl
//! sentiment_manifest.json      lexicon paths relative to the directory
//! categories.json
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lingua::{CategoryLexicon, LinguaError};
use crate::panels::{PanelError, SentimentEnsemble};
use crate::prompts::{ExampleKind, ExamplePool, PromptError, PromptRegistry};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("asset directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Lingua(#[from] LinguaError),
}

#[derive(Debug, Clone)]
pub struct Assets {
    pub prompts: PromptRegistry,
    pub complaints: ExamplePool,
    pub thoughts: ExamplePool,
    pub reframes: ExamplePool,
    pub sentiment: SentimentEnsemble,
    pub lexicon: CategoryLexicon,
}

impl Assets {
    pub fn builtin() -> Self {
        Self {
            prompts: PromptRegistry::builtin(),
            complaints: ExamplePool::builtin(ExampleKind::Complaint, 0),
            thoughts: ExamplePool::builtin(ExampleKind::Thought, 0),
            reframes: ExamplePool::builtin(ExampleKind::Reframe, 0),
            sentiment: SentimentEnsemble::builtin(),
            lexicon: CategoryLexicon::builtin(),
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, AssetError> {
        if !dir.is_dir() {
            return Err(AssetError::MissingDir(dir.to_path_buf()));
        }
        let mut assets = Self::builtin();
        assets.prompts = PromptRegistry::from_dir(&dir.join("prompts"))?;
        for (kind, slot) in [
            (ExampleKind::Complaint, &mut assets.complaints),
            (ExampleKind::Thought, &mut assets.thoughts),
            (ExampleKind::Reframe, &mut assets.reframes),
        ] {
            let path = dir.join("examples").join(kind.file_name());
            if path.exists() {
                let file = File::open(&path).map_err(|source| AssetError::Io { path: path.clone(), source })?;
                *slot = ExamplePool::from_jsonl(kind, BufReader::new(file), 0)?;
            }
        }
        let manifest = dir.join("sentiment_manifest.json");
        if manifest.exists() {
            assets.sentiment = SentimentEnsemble::from_manifest(&manifest, dir)?;
        }
        let categories = dir.join("categories.json");
        if categories.exists() {
            let text = std::fs::read_to_string(&categories)
                .map_err(|source| AssetError::Io { path: categories.clone(), source })?;
            assets.lexicon = CategoryLexicon::from_json(&text)?;
        }
        Ok(assets)
    }

    /// `from_dir` when a directory is given, the builtin set otherwise.
    pub fn load(dir: Option<&Path>) -> Result<Self, AssetError> {
        dir.map_or_else(|| Ok(Self::builtin()), Self::from_dir)
    }
}

impl Default for Assets {
    fn default() -> Self {
        Self::builtin()
    }
}
