#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use civility_core::llm::{demo_script, ChatBackend, CompletionParams, ScriptedBackend};
use civility_core::Assets;
use civility_service::{Service, ServiceSettings, SurveyPhase, SurveyResponse, Q4_ITEMS};

pub fn demo_backend() -> Arc<dyn ChatBackend> {
    Arc::new(ScriptedBackend::new(&demo_script()).unwrap())
}

pub fn open(dir: &Path, backend: Arc<dyn ChatBackend>) -> Service {
    let mut settings = ServiceSettings::new(dir);
    settings.seed = Some(11);
    Service::open(settings, Arc::new(Assets::builtin()), backend, CompletionParams::default()).unwrap()
}

pub fn survey(phase: SurveyPhase, q4: bool) -> SurveyResponse {
    SurveyResponse {
        phase,
        q1_polite: 2,
        q1_dignity: 3,
        q1_respect: 2,
        q2_demands: 4,
        q2_resources: 3,
        q3_pleasure: 2,
        q3_energy: 4,
        q4_support: q4.then(|| Q4_ITEMS.iter().map(|i| (i.to_string(), 4)).collect()),
    }
}
