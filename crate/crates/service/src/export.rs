use civility_core::lingua::MessageSource;
use civility_core::panels::{PanelId, PanelPayload, ReframeBundle};
use civility_core::simulant::{CloseReason, ComplaintSpec, Persona, Transcript};
use serde::{Deserialize, Serialize};

use crate::event::{Event, EventBody};
use crate::{ServiceError, Session, SurveyResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Incident,
    Message,
    Rating,
    Survey,
}

/// Selects export records; unset fields match everything. A `source`
/// keeps only message records from that source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    #[serde(default)]
    pub session: Option<String>,
    #[serde(default)]
    pub record: Option<RecordKind>,
    #[serde(default)]
    pub source: Option<MessageSource>,
}

/// A finished stage conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub session_id: String,
    /// Counted from 1.
    pub stage: usize,
    pub incident_id: String,
    pub spec: ComplaintSpec,
    pub persona: Persona,
    pub close_reason: CloseReason,
    pub turns: Transcript,
}

/// A support message: a representative reply (`human`) or a reframe
/// produced for the participant (`pilot`). Readable as metrics input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub message_id: String,
    pub source: MessageSource,
    pub text: String,
    pub session_id: String,
    pub stage: usize,
    pub incident_id: String,
    /// Conversation so far when the message was produced.
    pub incident_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reframe: Option<ReframeBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub stage: usize,
    pub panel: PanelId,
    pub score: i64,
    /// Seq of the rated panel_update event.
    pub panel_seq: u64,
    /// The rated reframe's message id, for Emo-Reframe ratings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub session_id: String,
    pub survey: SurveyResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ExportRecord {
    Incident(IncidentRecord),
    Message(MessageRecord),
    Rating(RatingRecord),
    Survey(SurveyRecord),
}

impl ExportRecord {
    pub fn kind(&self) -> RecordKind {
        match self {
            ExportRecord::Incident(_) => RecordKind::Incident,
            ExportRecord::Message(_) => RecordKind::Message,
            ExportRecord::Rating(_) => RecordKind::Rating,
            ExportRecord::Survey(_) => RecordKind::Survey,
        }
    }

    fn matches(&self, f: &ExportFilter) -> bool {
        if f.record.is_some_and(|k| k != self.kind()) {
            return false;
        }
        match (f.source, self) {
            (None, _) => true,
            (Some(s), ExportRecord::Message(m)) => m.source == s,
            (Some(_), _) => false,
        }
    }
}

fn message_id(session_id: &str, seq: u64) -> String {
    format!("{session_id}-{seq}")
}

/// Export records of one session log, in log order.
pub fn export_session(events: &[Event], filter: &ExportFilter) -> Result<Vec<ExportRecord>, ServiceError> {
    let Some((first, rest)) = events.split_first() else {
        return Ok(Vec::new());
    };
    let mut s = Session::from_created(first)?;
    if filter.session.as_ref().is_some_and(|id| *id != s.id) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for e in rest {
        let stage = s.stage_index + 1;
        let incident_id = s.stages[s.stage_index].incident_id();
        let before = s.conversation.transcript().text();
        s.apply(e)?;
        let record = match &e.body {
            EventBody::CsrMessage { text } => Some(ExportRecord::Message(MessageRecord {
                message_id: message_id(&s.id, e.seq),
                source: MessageSource::Human,
                text: text.clone(),
                session_id: s.id.clone(),
                stage,
                incident_id,
                incident_text: before,
                reframe: None,
            })),
            EventBody::PanelUpdate(PanelPayload::EmoReframe(b)) => Some(ExportRecord::Message(MessageRecord {
                message_id: message_id(&s.id, e.seq),
                source: MessageSource::Pilot,
                text: b.reframe_paraphrase.clone(),
                session_id: s.id.clone(),
                stage,
                incident_id,
                incident_text: before,
                reframe: Some(b.clone()),
            })),
            EventBody::Rating { panel, score, panel_seq } => Some(ExportRecord::Rating(RatingRecord {
                session_id: s.id.clone(),
                stage,
                panel: *panel,
                score: *score,
                panel_seq: *panel_seq,
                message_id: (*panel == PanelId::EmoReframe).then(|| message_id(&s.id, *panel_seq)),
            })),
            EventBody::Survey(r) => {
                Some(ExportRecord::Survey(SurveyRecord { session_id: s.id.clone(), survey: r.clone() }))
            }
            EventBody::Closed { stage_index, reason } => Some(ExportRecord::Incident(IncidentRecord {
                session_id: s.id.clone(),
                stage,
                incident_id,
                spec: s.stages[*stage_index],
                persona: s.flow.stages()[*stage_index].persona,
                close_reason: *reason,
                turns: s.finished.last().cloned().unwrap_or_default(),
            })),
            _ => None,
        };
        out.extend(record.filter(|r| r.matches(filter)));
    }
    Ok(out)
}

/// Export records of several session logs, session by session.
pub fn export_logs<'a>(
    logs: impl IntoIterator<Item = &'a [Event]>,
    filter: &ExportFilter,
) -> Result<Vec<ExportRecord>, ServiceError> {
    let mut out = Vec::new();
    for events in logs {
        out.extend(export_session(events, filter)?);
    }
    Ok(out)
}
