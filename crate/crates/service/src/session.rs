use std::collections::BTreeMap;

use civility_core::panels::{PanelId, PanelPayload};
use civility_core::simulant::{ComplaintSpec, ConversationState, Transcript};
use serde::Serialize;

use crate::event::{Event, EventBody};
use crate::flow::Stage;
use crate::{ServiceError, StudyFlow, SurveyPhase, SurveyResponse};

/// Session state; exactly the fold of its event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    pub flow: StudyFlow,
    /// Complaint spec per stage.
    pub stages: Vec<ComplaintSpec>,
    pub stage_index: usize,
    pub conversation: ConversationState,
    /// Panels awaiting a rating, with the seq of their panel_update event.
    pub pending_ratings: BTreeMap<PanelId, u64>,
    /// Latest payload of each panel in the current stage.
    pub panels: BTreeMap<PanelId, PanelPayload>,
    pub cues: Vec<String>,
    pub surveys: BTreeMap<SurveyPhase, SurveyResponse>,
    /// Transcripts of stages whose conversation has closed.
    pub finished: Vec<Transcript>,
    pub complete: bool,
    pub messages: usize,
    #[serde(skip)]
    pending_csr: Option<String>,
    #[serde(skip)]
    last_seq: u64,
    #[serde(skip)]
    last_timestamp_us: u64,
}

fn bad(event: &Event, why: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("event {} ({}): {why}", event.seq, event.body.kind()))
}

impl Session {
    /// Starts the fold from a `session_created` event.
    pub fn from_created(event: &Event) -> Result<Self, ServiceError> {
        let EventBody::SessionCreated { session_id, flow, stages, complaint } = &event.body else {
            return Err(bad(event, "a log must open with session_created"));
        };
        if event.seq != 0 {
            return Err(bad(event, "first event must have seq 0"));
        }
        if stages.len() != flow.len() {
            return Err(bad(event, "one complaint spec per stage is required"));
        }
        let conversation = ConversationState::new_at(flow.stages()[0].persona, complaint, Some(event.timestamp_us))
            .map_err(|e| bad(event, e))?;
        Ok(Self {
            id: session_id.clone(),
            flow: flow.clone(),
            stages: stages.clone(),
            stage_index: 0,
            conversation,
            pending_ratings: BTreeMap::new(),
            panels: BTreeMap::new(),
            cues: Vec::new(),
            surveys: BTreeMap::new(),
            finished: Vec::new(),
            complete: false,
            messages: 0,
            pending_csr: None,
            last_seq: 0,
            last_timestamp_us: event.timestamp_us,
        })
    }

    /// Rebuilds a session from its full log.
    pub fn replay(events: &[Event]) -> Result<Self, ServiceError> {
        let (first, rest) = events.split_first().ok_or_else(|| ServiceError::Storage("empty log".into()))?;
        let mut s = Self::from_created(first)?;
        for e in rest {
            s.apply(e)?;
        }
        Ok(s)
    }

    pub fn stage(&self) -> &Stage {
        &self.flow.stages()[self.stage_index]
    }

    pub fn is_last_stage(&self) -> bool {
        self.stage_index + 1 == self.flow.len()
    }

    /// Whether the current stage's conversation is closed or the session is done.
    pub fn is_closed(&self) -> bool {
        self.complete || self.conversation.is_closed()
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq + 1
    }

    pub fn last_timestamp_us(&self) -> u64 {
        self.last_timestamp_us
    }

    /// Fails when a message may not be sent now.
    pub fn check_can_message(&self) -> Result<(), ServiceError> {
        if self.is_closed() {
            return Err(ServiceError::SessionClosed);
        }
        if !self.pending_ratings.is_empty() {
            return Err(ServiceError::RatingPending(self.pending_ratings.keys().copied().collect()));
        }
        Ok(())
    }

    pub fn check_rating(&self, panel: PanelId, score: i64) -> Result<u64, ServiceError> {
        if !(1..=7).contains(&score) {
            return Err(ServiceError::Range { field: "score".into(), value: score, min: 1, max: 7 });
        }
        self.pending_ratings.get(&panel).copied().ok_or(ServiceError::NotPending(panel))
    }

    pub fn check_survey(&self, r: &SurveyResponse) -> Result<(), ServiceError> {
        if self.surveys.contains_key(&r.phase) {
            return Err(ServiceError::Duplicate(format!("survey {}", r.phase)));
        }
        match r.phase {
            SurveyPhase::Pre => {
                if self.messages > 0 {
                    return Err(ServiceError::Phase("the pre survey must come before the first message".into()));
                }
                if r.q4_support.is_some() {
                    return Err(ServiceError::Phase("q4_support is not asked before the study".into()));
                }
            }
            SurveyPhase::PostStage(k) => {
                if k > self.flow.len() {
                    return Err(ServiceError::Phase(format!("the flow has {} stage(s)", self.flow.len())));
                }
                if k > self.finished.len() {
                    return Err(ServiceError::Phase(format!("stage {k} has not finished")));
                }
                if r.q4_support.is_some() && !self.flow.stages()[k - 1].has_emo_panels() {
                    return Err(ServiceError::Phase(format!("stage {k} showed no emotion panels")));
                }
            }
        }
        r.check()
    }

    /// Folds one event into the state, rejecting anything the live
    /// operations would not have produced.
    pub fn apply(&mut self, event: &Event) -> Result<(), ServiceError> {
        if event.seq != self.last_seq + 1 {
            return Err(bad(event, format!("expected seq {}", self.last_seq + 1)));
        }
        if event.timestamp_us <= self.last_timestamp_us {
            return Err(bad(event, "timestamps must increase"));
        }
        let ts = Some(event.timestamp_us);
        match &event.body {
            EventBody::SessionCreated { .. } => return Err(bad(event, "duplicate session_created")),
            EventBody::CsrMessage { text } => {
                self.check_can_message().map_err(|e| bad(event, e))?;
                if self.pending_csr.is_some() {
                    return Err(bad(event, "previous message has no client reply"));
                }
                self.pending_csr = Some(text.clone());
                self.messages += 1;
            }
            EventBody::ClientReply { outcome, cues } => {
                let csr = self.pending_csr.take().ok_or_else(|| bad(event, "no message to reply to"))?;
                self.conversation = self.conversation.apply_exchange(&csr, outcome, ts).map_err(|e| bad(event, e))?;
                self.cues = cues.clone();
            }
            EventBody::PanelUpdate(payload) => {
                let id = payload.id();
                if !self.stage().panels.contains(&id) {
                    return Err(bad(event, format!("{id} is not enabled on this stage")));
                }
                if self.is_closed() || self.pending_csr.is_some() {
                    return Err(bad(event, "panels follow an open client reply"));
                }
                self.pending_ratings.insert(id, event.seq);
                self.panels.insert(id, payload.clone());
            }
            EventBody::Rating { panel, score, panel_seq } => {
                if self.check_rating(*panel, *score).map_err(|e| bad(event, e))? != *panel_seq {
                    return Err(bad(event, "rating refers to a stale panel update"));
                }
                self.pending_ratings.remove(panel);
            }
            EventBody::Survey(r) => {
                self.check_survey(r).map_err(|e| bad(event, e))?;
                self.surveys.insert(r.phase, r.clone());
            }
            EventBody::Closed { stage_index, .. } => {
                if *stage_index != self.stage_index || !self.conversation.is_closed() || self.complete {
                    return Err(bad(event, "closed does not match the conversation"));
                }
                if self.finished.len() != self.stage_index {
                    return Err(bad(event, "stage already closed"));
                }
                self.finished.push(self.conversation.transcript().clone());
                self.pending_ratings.clear();
                self.complete = self.is_last_stage();
            }
            EventBody::StageAdvanced { stage_index, complaint } => {
                if *stage_index != self.stage_index + 1
                    || self.finished.len() != *stage_index
                    || *stage_index >= self.flow.len()
                {
                    return Err(bad(event, "stage_advanced out of order"));
                }
                let persona = self.flow.stages()[*stage_index].persona;
                self.conversation = ConversationState::new_at(persona, complaint, ts).map_err(|e| bad(event, e))?;
                self.stage_index = *stage_index;
                self.panels.clear();
                self.cues.clear();
                self.pending_ratings.clear();
            }
        }
        self.last_seq = event.seq;
        self.last_timestamp_us = event.timestamp_us;
        Ok(())
    }
}

/// Events of one operation, applied to a scratch copy of the session.
pub(crate) struct Draft {
    pub session: Session,
    pub events: Vec<Event>,
    clock: fn() -> u64,
}

impl Draft {
    pub fn new(session: &Session, clock: fn() -> u64) -> Self {
        Self { session: session.clone(), events: Vec::new(), clock }
    }

    pub fn push(&mut self, body: EventBody) -> Result<(), ServiceError> {
        let timestamp_us = (self.clock)().max(self.session.last_timestamp_us + 1);
        let event = Event { seq: self.session.next_seq(), timestamp_us, body, commit: false };
        self.session.apply(&event)?;
        self.events.push(event);
        Ok(())
    }

    /// Marks the batch committed and returns it with the resulting state.
    pub fn finish(mut self) -> (Session, Vec<Event>) {
        if let Some(last) = self.events.last_mut() {
            last.commit = true;
        }
        (self.session, self.events)
    }
}
