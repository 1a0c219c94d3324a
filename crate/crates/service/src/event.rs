use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use civility_core::panels::{PanelId, PanelPayload};
use civility_core::simulant::{CloseReason, ComplaintSpec, ExchangeOutcome};
use serde::{Deserialize, Serialize};

use crate::{ServiceError, StudyFlow, SurveyResponse};

/// One line of a session log.
///
/// The events of one operation are written together; the last one carries
/// `commit: true`. Replay drops a trailing group that never committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp_us: u64,
    #[serde(flatten)]
    pub body: EventBody,
    #[serde(default, skip_serializing_if = "is_false")]
    pub commit: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionCreated { session_id: String, flow: StudyFlow, stages: Vec<ComplaintSpec>, complaint: String },
    CsrMessage { text: String },
    ClientReply { outcome: ExchangeOutcome, cues: Vec<String> },
    PanelUpdate(PanelPayload),
    Rating { panel: PanelId, score: i64, panel_seq: u64 },
    Survey(SurveyResponse),
    Closed { stage_index: usize, reason: CloseReason },
    StageAdvanced { stage_index: usize, complaint: String },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::SessionCreated { .. } => "session_created",
            EventBody::CsrMessage { .. } => "csr_message",
            EventBody::ClientReply { .. } => "client_reply",
            EventBody::PanelUpdate(_) => "panel_update",
            EventBody::Rating { .. } => "rating",
            EventBody::Survey(_) => "survey",
            EventBody::Closed { .. } => "closed",
            EventBody::StageAdvanced { .. } => "stage_advanced",
        }
    }
}

/// Append-only JSONL file holding one session's events.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn create(path: &Path) -> Result<Self, ServiceError> {
        let file = OpenOptions::new().append(true).create_new(true).open(path)?;
        if let Some(dir) = path.parent() {
            // make the new directory entry durable too
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(Self { path: path.to_path_buf(), file })
    }

    /// Reads every committed event, cutting off a torn tail.
    pub fn open(path: &Path) -> Result<(Self, Vec<Event>), ServiceError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let (events, committed_len) =
            parse_committed(&bytes).map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
        let file = OpenOptions::new().append(true).open(path)?;
        if committed_len < bytes.len() {
            log::warn!("{}: dropping {} uncommitted byte(s)", path.display(), bytes.len() - committed_len);
            file.set_len(committed_len as u64)?;
            file.sync_all()?;
        }
        Ok((Self { path: path.to_path_buf(), file }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one operation's events and syncs them to disk.
    pub fn append(&mut self, events: &[Event]) -> Result<(), ServiceError> {
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e).map_err(|e| ServiceError::Storage(e.to_string()))?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Splits a log into committed events and the byte length they occupy.
///
/// A line that fails to parse is tolerated only as part of the final,
/// uncommitted group.
pub fn parse_committed(bytes: &[u8]) -> Result<(Vec<Event>, usize), String> {
    let mut events = Vec::new();
    let mut group = Vec::new();
    let mut committed_len = 0;
    let mut pos = 0;
    let mut line_no = 0;
    while pos < bytes.len() {
        line_no += 1;
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            break;
        };
        let line = &bytes[pos..pos + nl];
        pos += nl + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let event: Event = match serde_json::from_slice(line) {
            Ok(e) => e,
            Err(e) => {
                let rest = &bytes[pos..];
                if rest.iter().all(u8::is_ascii_whitespace) {
                    break;
                }
                return Err(format!("line {line_no}: {e}"));
            }
        };
        let commit = event.commit;
        group.push(event);
        if commit {
            events.append(&mut group);
            committed_len = pos;
        }
    }
    Ok((events, committed_len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(seq: u64, commit: bool) -> Event {
        Event { seq, timestamp_us: seq, body: EventBody::CsrMessage { text: format!("m{seq}") }, commit }
    }

    fn encode(events: &[Event]) -> Vec<u8> {
        let mut out = Vec::new();
        for e in events {
            out.extend(serde_json::to_vec(e).unwrap());
            out.push(b'\n');
        }
        out
    }

    #[test]
    fn wire_shape() {
        let v = serde_json::to_value(ev(3, true)).unwrap();
        assert_eq!(v["kind"], "csr_message");
        assert_eq!(v["payload"]["text"], "m3");
        assert_eq!(v["commit"], true);
        assert!(serde_json::to_value(ev(3, false)).unwrap().get("commit").is_none());
    }

    #[test]
    fn torn_tail_is_dropped() {
        let mut bytes = encode(&[ev(1, true), ev(2, false), ev(3, true)]);
        let full = bytes.len();
        bytes.extend(encode(&[ev(4, false)]));
        bytes.extend(b"{\"seq\":5,\"timest");
        let (events, len) = parse_committed(&bytes).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(len, full);
    }

    #[test]
    fn garbage_before_committed_data_is_an_error() {
        let mut bytes = b"not json\n".to_vec();
        bytes.extend(encode(&[ev(1, true)]));
        assert!(parse_committed(&bytes).unwrap_err().starts_with("line 1"));
    }
}
