use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use civility_core::llm::{demo_script, BackendConfig, BackendKind, ChatBackend, CompletionParams, ScriptRule};
use civility_core::panels::PanelId;
use civility_core::Assets;
use serde::Deserialize;

use crate::{default_rating_labels, ServiceError, ServiceSettings, StudyFlow};

/// Which completion backend to use. A scripted backend without a script
/// file uses the bundled demo script.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSettings {
    #[serde(default)]
    pub kind: Option<BackendKind>,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// JSON file with `[{"matcher": ..., "response": ...}]` rules.
    #[serde(default)]
    pub script: Option<PathBuf>,
}

impl BackendSettings {
    pub fn to_config(&self) -> Result<BackendConfig, ServiceError> {
        let kind = self.kind.unwrap_or(BackendKind::Scripted);
        let script = match (kind, &self.script) {
            (BackendKind::Scripted, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
                let rules: Vec<ScriptRule> = serde_json::from_str(&text)
                    .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
                Some(rules)
            }
            (BackendKind::Scripted, None) => Some(demo_script()),
            (BackendKind::Remote, _) => None,
        };
        Ok(BackendConfig {
            kind,
            endpoint_url: self.endpoint_url.clone(),
            api_key_env: self.api_key_env.clone(),
            model: self.model.clone(),
            script,
        })
    }

    pub fn build(&self) -> Result<Arc<dyn ChatBackend>, ServiceError> {
        self.to_config()?.build().map_err(|e| ServiceError::Config(e.to_string()))
    }
}

/// Contents of the service config file (TOML). Relative paths are taken
/// relative to the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub bind: Option<String>,
    #[serde(default)]
    pub port: Option<u16>,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub assets: Option<PathBuf>,
    #[serde(default)]
    pub flow: Option<PathBuf>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub cues: Option<bool>,
    #[serde(default)]
    pub backend: BackendSettings,
    #[serde(default)]
    pub completion: Option<CompletionParams>,
    #[serde(default)]
    pub rating_labels: BTreeMap<PanelId, String>,
}

/// Everything needed to start serving.
pub struct Resolved {
    pub addr: SocketAddr,
    pub settings: ServiceSettings,
    pub assets: Arc<Assets>,
    pub backend: Arc<dyn ChatBackend>,
    pub params: CompletionParams,
    pub static_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn from_path(path: &Path) -> Result<Self, ServiceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ServiceConfig =
            toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data_dir, &mut cfg.assets, &mut cfg.flow, &mut cfg.static_dir, &mut cfg.backend.script]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<Resolved, ServiceError> {
        let bind = self.bind.as_deref().unwrap_or("127.0.0.1");
        let port = self.port.unwrap_or(8080);
        let addr: SocketAddr = format!("{bind}:{port}")
            .parse()
            .map_err(|e| ServiceError::Config(format!("bind address {bind}:{port}: {e}")))?;
        let mut settings = ServiceSettings::new(self.data_dir.clone().unwrap_or_else(|| PathBuf::from("data")));
        if let Some(flow) = &self.flow {
            settings.default_flow = StudyFlow::from_path(flow)?;
        }
        settings.seed = self.seed;
        settings.cues = self.cues.unwrap_or(true);
        let mut labels = default_rating_labels();
        labels.extend(self.rating_labels.clone());
        settings.rating_labels = labels;
        let assets = Assets::load(self.assets.as_deref()).map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(Resolved {
            addr,
            settings,
            assets: Arc::new(assets),
            backend: self.backend.build()?,
            params: self.completion.clone().unwrap_or_default(),
            static_dir: self.static_dir.clone(),
        })
    }
}
