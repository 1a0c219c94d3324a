mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use civility_core::llm::{demo_script, user_content, FnBackend, LlmError, ScriptedBackend};
use civility_core::panels::{PanelId, PanelPayload};
use civility_core::simulant::Persona;
use civility_service::event::{Event, EventBody};
use civility_service::{CreateRequest, Service, ServiceError, Stage, StudyFlow, SurveyPhase};
use common::{open, survey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SESSIONS: usize = 50;

/// Demo script, except that client replies are random and every call may
/// fail with a small probability.
fn fuzz_backend(seed: u64) -> Arc<dyn civility_core::llm::ChatBackend> {
    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
    let demo = ScriptedBackend::new(&demo_script()).unwrap();
    Arc::new(FnBackend(move |m: &[_], _: &_| {
        let text = user_content(m);
        let mut rng = rng.lock().unwrap();
        if rng.random_bool(0.01) {
            return Err(LlmError::Transport { message: "connection reset".into(), attempts: 1 });
        }
        if text.contains("UNCIVIL customer") || text.contains("POLITE customer") {
            return Ok(match rng.random_range(0..20) {
                0 => "FINISH:999".to_string(),
                1 => "Forget it. FINISH:999".to_string(),
                2 => "   ".to_string(),
                n => format!("I still need help with order {n}."),
            });
        }
        Ok(demo.respond(&text).to_string())
    }))
}

fn random_flow(rng: &mut ChaCha8Rng) -> Option<StudyFlow> {
    if rng.random_bool(0.5) {
        return None;
    }
    let stages = (0..rng.random_range(1..4))
        .map(|_| {
            let panels: Vec<PanelId> = PanelId::ALL.into_iter().filter(|_| rng.random_bool(0.5)).collect();
            let persona = if rng.random_bool(0.5) { Persona::Civil } else { Persona::Uncivil };
            Stage::new(persona, &panels, false)
        })
        .collect();
    Some(StudyFlow::new(stages).unwrap())
}

/// Independent check of the ordering rules over one log.
fn check_log(events: &[Event]) {
    let EventBody::SessionCreated { flow, .. } = &events[0].body else { panic!("log must open with session_created") };
    let mut pending = BTreeSet::new();
    let mut stage = 0;
    let mut awaiting: Option<BTreeSet<PanelId>> = None;
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
        if i > 0 {
            assert!(e.timestamp_us > events[i - 1].timestamp_us, "timestamps strictly increase");
        }
        match &e.body {
            EventBody::CsrMessage { .. } => {
                assert!(pending.is_empty(), "csr_message accepted with pending ratings at seq {}", e.seq);
                assert!(awaiting.as_ref().is_none_or(BTreeSet::is_empty), "missing panel_update before seq {}", e.seq);
                awaiting = None;
            }
            EventBody::ClientReply { outcome, .. } => {
                awaiting = outcome.reply.as_ref().map(|_| flow.stages()[stage].panels.clone());
            }
            EventBody::PanelUpdate(p) => {
                let id = PanelPayload::id(p);
                assert!(awaiting.as_mut().is_some_and(|a| a.remove(&id)), "unexpected panel_update at {}", e.seq);
                pending.insert(id);
            }
            EventBody::Rating { panel, .. } => assert!(pending.remove(panel)),
            EventBody::Closed { .. } => {
                awaiting = None;
                pending.clear();
            }
            EventBody::StageAdvanced { stage_index, .. } => stage = *stage_index,
            EventBody::Survey(_) | EventBody::SessionCreated { .. } => {}
        }
    }
}

fn snapshot(svc: &Service) -> BTreeMap<String, civility_service::Session> {
    svc.session_ids().into_iter().map(|id| (id.clone(), svc.session(&id).unwrap())).collect()
}

#[test]
fn crash_replay_over_fuzzed_sessions() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let backend = fuzz_backend(7);
    let mut svc = open(dir.path(), backend.clone());
    let mut ids = Vec::new();
    let (mut gated, mut gated_rejected, mut restarts) = (0, 0, 0);

    while ids.len() < SESSIONS {
        match svc.create_session(CreateRequest { flow: random_flow(&mut rng), spec: None }) {
            Ok(s) => ids.push(s.id),
            Err(ServiceError::Backend(_)) => continue,
            Err(e) => panic!("{e}"),
        }
        let id = ids.last().unwrap().clone();
        for _ in 0..rng.random_range(5..60) {
            let before = svc.session(&id).unwrap();
            let result = match rng.random_range(0..10) {
                0..=5 => {
                    let r = svc.post_message(&id, &format!("Reply {}", rng.random_range(0..1000))).map(|_| ());
                    if !before.pending_ratings.is_empty() && !before.is_closed() {
                        gated += 1;
                        if matches!(r, Err(ServiceError::RatingPending(_))) {
                            gated_rejected += 1;
                        }
                    }
                    r
                }
                6 | 7 => {
                    let panel = PanelId::ALL[rng.random_range(0..3)];
                    svc.post_rating(&id, panel, rng.random_range(0..9)).map(|_| ())
                }
                8 => {
                    let phase = match rng.random_range(0..4) {
                        0 => SurveyPhase::Pre,
                        k => SurveyPhase::PostStage(k),
                    };
                    svc.post_survey(&id, survey(phase, rng.random_bool(0.3))).map(|_| ())
                }
                _ => {
                    // crash: drop everything in memory, sometimes leave a torn write behind
                    let expected = snapshot(&svc);
                    drop(svc);
                    if rng.random_bool(0.5) {
                        let victim = &ids[rng.random_range(0..ids.len())];
                        let mut f = std::fs::OpenOptions::new()
                            .append(true)
                            .open(dir.path().join(format!("{victim}.jsonl")))
                            .unwrap();
                        f.write_all(b"{\"seq\":99999,\"timestamp_us\":1,\"kind\":\"csr_mess").unwrap();
                    }
                    svc = open(dir.path(), backend.clone());
                    restarts += 1;
                    assert_eq!(snapshot(&svc), expected, "replay after restart {restarts}");
                    Ok(())
                }
            };
            if result.is_err() {
                assert_eq!(svc.session(&id).unwrap(), before, "failed operation changed state: {result:?}");
            }
        }
    }

    let expected = snapshot(&svc);
    drop(svc);
    let svc = open(dir.path(), backend);
    assert_eq!(snapshot(&svc), expected);
    assert_eq!(expected.len(), SESSIONS);
    for id in &ids {
        let events = svc.events(id).unwrap();
        check_log(&events);
        assert_eq!(civility_service::Session::replay(&events).unwrap(), expected[id]);
    }
    assert!(gated > 20, "too few gated attempts: {gated}");
    assert_eq!(gated_rejected, gated, "every message with unrated panels is refused");
    assert!(restarts > 5);
    assert!(start.elapsed().as_secs() < 60);
}
