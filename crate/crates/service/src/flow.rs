use std::collections::BTreeSet;
use std::path::Path;

use civility_core::panels::PanelId;
use civility_core::simulant::Persona;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub persona: Persona,
    #[serde(default)]
    pub panels: BTreeSet<PanelId>,
    #[serde(default)]
    pub warmup: bool,
}

impl Stage {
    pub fn new(persona: Persona, panels: &[PanelId], warmup: bool) -> Self {
        Self { persona, panels: panels.iter().copied().collect(), warmup }
    }

    /// Whether the stage shows an emotion-focused panel.
    pub fn has_emo_panels(&self) -> bool {
        self.panels.contains(&PanelId::EmoLabel) || self.panels.contains(&PanelId::EmoReframe)
    }
}

/// Ordered study stages; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FlowDef")]
pub struct StudyFlow {
    stages: Vec<Stage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDef {
    stages: Vec<Stage>,
}

impl TryFrom<FlowDef> for StudyFlow {
    type Error = ServiceError;

    fn try_from(def: FlowDef) -> Result<Self, ServiceError> {
        StudyFlow::new(def.stages)
    }
}

impl StudyFlow {
    pub fn new(stages: Vec<Stage>) -> Result<Self, ServiceError> {
        if stages.is_empty() {
            return Err(ServiceError::InvalidFlow("a flow needs at least one stage".into()));
        }
        Ok(Self { stages })
    }

    /// Reads a flow from TOML, or JSON when the file ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self, ServiceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| ServiceError::InvalidFlow(format!("{}: {e}", path.display())))
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for StudyFlow {
    /// Warm-up with a civil client, then civil, uncivil, and a final uncivil
    /// stage that adds the emotion panels.
    fn default() -> Self {
        use PanelId::*;
        Self {
            stages: vec![
                Stage::new(Persona::Civil, &[InfoGuide], true),
                Stage::new(Persona::Civil, &[InfoGuide], false),
                Stage::new(Persona::Uncivil, &[InfoGuide], false),
                Stage::new(Persona::Uncivil, &[InfoGuide, EmoLabel, EmoReframe], false),
            ],
        }
    }
}
