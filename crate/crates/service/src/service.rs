use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use civility_core::llm::{ChatBackend, CompletionParams};
use civility_core::panels::{compute_panel, PanelId, PanelPayload};
use civility_core::simulant::{
    client_completion, generate_complaint, generate_cues, Category, ComplaintSpec, Domain, ExchangeOutcome, SimError,
};
use civility_core::{Assets, ChainContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::event::{Event, EventBody, EventLog};
use crate::export::{export_logs, ExportFilter, ExportRecord};
use crate::session::Draft;
use crate::{ServiceError, Session, StudyFlow, SurveyResponse};

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub data_dir: PathBuf,
    pub default_flow: StudyFlow,
    /// Seeds domain, category and seed choices for sessions created without a spec.
    pub seed: Option<u64>,
    /// Wording of the single rating item shown under each panel.
    pub rating_labels: BTreeMap<PanelId, String>,
    /// Whether replies come with suggested response cues.
    pub cues: bool,
}

pub fn default_rating_labels() -> BTreeMap<PanelId, String> {
    PanelId::ALL.iter().map(|&p| (p, "How helpful was this panel for your last reply?".to_string())).collect()
}

impl ServiceSettings {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            default_flow: StudyFlow::default(),
            seed: None,
            rating_labels: default_rating_labels(),
            cues: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub flow: Option<StudyFlow>,
    #[serde(default)]
    pub spec: Option<ComplaintSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessageReply {
    pub client_reply: Option<String>,
    /// The stage's conversation closed with this exchange.
    pub closed: bool,
    pub panels: BTreeMap<PanelId, PanelPayload>,
    pub cues: Vec<String>,
    pub pending_ratings: Vec<PanelId>,
    pub stage_index: usize,
    pub stage_advanced: bool,
    pub session_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub pending_ratings: Vec<PanelId>,
}

/// Session view returned by the HTTP API.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: Session,
    pub stage_count: usize,
    pub rating_labels: BTreeMap<PanelId, String>,
}

struct Entry {
    session: Session,
    log: EventLog,
    events: Vec<Event>,
}

fn now_us() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // state only changes after a successful commit, so a poisoned guard is still consistent
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Live study sessions backed by one event log per session.
///
/// Operations on one session run one at a time; distinct sessions proceed
/// in parallel. Every method blocks on completion calls.
pub struct Service {
    settings: ServiceSettings,
    assets: Arc<Assets>,
    backend: Arc<dyn ChatBackend>,
    params: CompletionParams,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
    rng: Mutex<ChaCha8Rng>,
}

impl Service {
    /// Opens the data directory and replays every session log in it.
    pub fn open(
        settings: ServiceSettings,
        assets: Arc<Assets>,
        backend: Arc<dyn ChatBackend>,
        params: CompletionParams,
    ) -> Result<Self, ServiceError> {
        params.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        std::fs::create_dir_all(&settings.data_dir)?;
        let mut sessions = BTreeMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&settings.data_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let (log, events) = EventLog::open(&path)?;
            if events.is_empty() {
                log::warn!("{}: no committed events, removing", path.display());
                drop(log);
                std::fs::remove_file(&path)?;
                continue;
            }
            let session = Session::replay(&events)?;
            sessions.insert(session.id.clone(), Arc::new(Mutex::new(Entry { session, log, events })));
        }
        let rng = match settings.seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::from_os_rng(),
        };
        Ok(Self { settings, assets, backend, params, sessions: RwLock::new(sessions), rng: Mutex::new(rng) })
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.settings
    }

    fn ctx(&self) -> ChainContext<'_> {
        ChainContext { assets: &self.assets, backend: &*self.backend, params: &self.params }
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ServiceError> {
        let map = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        map.get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    fn commit(entry: &mut Entry, draft: Draft) -> Result<(), ServiceError> {
        let (session, events) = draft.finish();
        entry.log.append(&events)?;
        entry.session = session;
        entry.events.extend(events);
        Ok(())
    }

    /// One complaint spec per stage: a fixed domain and seed, with the
    /// category rotating from stage to stage.
    fn plan_stages(&self, spec: Option<ComplaintSpec>, count: usize) -> Vec<ComplaintSpec> {
        let spec = spec.unwrap_or_else(|| {
            let mut rng = lock(&self.rng);
            let domain = [Domain::Airlines, Domain::Hotels][rng.random_range(0..2)];
            let category = Category::ALL[rng.random_range(0..Category::ALL.len())];
            ComplaintSpec::new(domain, category, rng.random_range(0..1_000_000))
        });
        let start = Category::ALL.iter().position(|&c| c == spec.category).unwrap_or(0);
        (0..count)
            .map(|k| ComplaintSpec { category: Category::ALL[(start + k) % Category::ALL.len()], ..spec })
            .collect()
    }

    pub fn create_session(&self, req: CreateRequest) -> Result<Session, ServiceError> {
        let flow = req.flow.unwrap_or_else(|| self.settings.default_flow.clone());
        let stages = self.plan_stages(req.spec, flow.len());
        let complaint = generate_complaint(&self.ctx(), &stages[0])?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let event = Event {
            seq: 0,
            timestamp_us: now_us(),
            body: EventBody::SessionCreated { session_id: id.clone(), flow, stages, complaint },
            commit: true,
        };
        let session = Session::from_created(&event)?;
        let mut log = EventLog::create(&self.settings.data_dir.join(format!("{id}.jsonl")))?;
        log.append(std::slice::from_ref(&event))?;
        let entry = Entry { session: session.clone(), log, events: vec![event] };
        self.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(id, Arc::new(Mutex::new(entry)));
        Ok(session)
    }

    pub fn session(&self, id: &str) -> Result<Session, ServiceError> {
        let entry = self.entry(id)?;
        let session = lock(&entry).session.clone();
        Ok(session)
    }

    pub fn view(&self, id: &str) -> Result<SessionView, ServiceError> {
        let session = self.session(id)?;
        let rating_labels = session
            .stage()
            .panels
            .iter()
            .filter_map(|p| self.settings.rating_labels.get(p).map(|l| (*p, l.clone())))
            .collect();
        Ok(SessionView { stage_count: session.flow.len(), session, rating_labels })
    }

    pub fn events(&self, id: &str) -> Result<Vec<Event>, ServiceError> {
        let entry = self.entry(id)?;
        let events = lock(&entry).events.clone();
        Ok(events)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Sends a representative message and runs the client turn, the cues,
    /// the stage's panels and, on closure, the stage transition.
    pub fn post_message(&self, id: &str, text: &str) -> Result<MessageReply, ServiceError> {
        let entry = self.entry(id)?;
        let mut entry = lock(&entry);
        let session = &entry.session;
        session.check_can_message()?;
        if text.trim().is_empty() {
            return Err(ServiceError::InvalidRequest("message is empty".into()));
        }
        let ctx = self.ctx();
        let outcome = ExchangeOutcome::parse(&client_completion(&ctx, &session.conversation, text)?);
        let mut draft = Draft::new(session, now_us);
        draft.push(EventBody::CsrMessage { text: text.to_string() })?;
        let after = session.conversation.apply_exchange(text, &outcome, None)?;
        let cues = if self.settings.cues && !after.is_closed() {
            match generate_cues(&ctx, &after) {
                Ok(c) => c,
                Err(SimError::CueParse(why)) => {
                    log::warn!("session {id}: no cues ({why})");
                    Vec::new()
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            Vec::new()
        };
        let reply = outcome.reply.clone();
        draft.push(EventBody::ClientReply { outcome, cues })?;

        let mut panels = BTreeMap::new();
        if reply.is_some() && !draft.session.conversation.is_closed() {
            for &panel in &draft.session.stage().panels.clone() {
                let payload = compute_panel(&ctx, panel, draft.session.conversation.transcript())?;
                panels.insert(panel, payload.clone());
                draft.push(EventBody::PanelUpdate(payload))?;
            }
        }

        let closed = draft.session.conversation.is_closed();
        let mut stage_advanced = false;
        if let (true, Some(reason)) = (closed, draft.session.conversation.close_reason()) {
            let stage_index = draft.session.stage_index;
            draft.push(EventBody::Closed { stage_index, reason })?;
            if !draft.session.complete {
                let complaint = generate_complaint(&ctx, &draft.session.stages[stage_index + 1])?;
                draft.push(EventBody::StageAdvanced { stage_index: stage_index + 1, complaint })?;
                stage_advanced = true;
            }
        }
        let cues = draft.session.cues.clone();
        Self::commit(&mut entry, draft)?;
        let s = &entry.session;
        Ok(MessageReply {
            client_reply: reply,
            closed,
            panels,
            cues,
            pending_ratings: s.pending_ratings.keys().copied().collect(),
            stage_index: s.stage_index,
            stage_advanced,
            session_complete: s.complete,
        })
    }

    pub fn post_rating(&self, id: &str, panel: PanelId, score: i64) -> Result<Ack, ServiceError> {
        let entry = self.entry(id)?;
        let mut entry = lock(&entry);
        let panel_seq = entry.session.check_rating(panel, score)?;
        let mut draft = Draft::new(&entry.session, now_us);
        draft.push(EventBody::Rating { panel, score, panel_seq })?;
        Self::commit(&mut entry, draft)?;
        Ok(Ack { pending_ratings: entry.session.pending_ratings.keys().copied().collect() })
    }

    pub fn post_survey(&self, id: &str, response: SurveyResponse) -> Result<Ack, ServiceError> {
        let entry = self.entry(id)?;
        let mut entry = lock(&entry);
        entry.session.check_survey(&response)?;
        let mut draft = Draft::new(&entry.session, now_us);
        draft.push(EventBody::Survey(response))?;
        Self::commit(&mut entry, draft)?;
        Ok(Ack { pending_ratings: entry.session.pending_ratings.keys().copied().collect() })
    }

    /// Export over a snapshot taken with every session locked at once.
    pub fn export(&self, filter: &ExportFilter) -> Result<Vec<ExportRecord>, ServiceError> {
        let entries: Vec<Arc<Mutex<Entry>>> = {
            let map = self.sessions.read().unwrap_or_else(|e| e.into_inner());
            match &filter.session {
                Some(id) => map.get(id).cloned().into_iter().collect(),
                None => map.values().cloned().collect(),
            }
        };
        let logs: Vec<Vec<Event>> = {
            let guards: Vec<_> = entries.iter().map(|e| lock(e)).collect();
            guards.iter().map(|g| g.events.clone()).collect()
        };
        export_logs(logs.iter().map(Vec::as_slice), filter)
    }
}
