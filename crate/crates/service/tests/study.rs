mod common;

use std::collections::BTreeSet;

use civility_core::lingua::MessageSource;
use civility_core::panels::PanelId;
use civility_core::simulant::{Category, CloseReason, ComplaintSpec, Domain, Persona, Speaker, MAX_EXCHANGES};
use civility_service::event::EventBody;
use civility_service::export::{ExportFilter, ExportRecord, RecordKind};
use civility_service::{CreateRequest, ServiceError, Stage, StudyFlow, SurveyPhase};
use common::{demo_backend, open, survey};

/// Drives one session of `flow` to completion, rating every panel and
/// answering every survey.
fn complete_study(svc: &civility_service::Service, flow: Option<StudyFlow>) -> String {
    let id = svc.create_session(CreateRequest { flow, spec: None }).unwrap().id;
    svc.post_survey(&id, survey(SurveyPhase::Pre, false)).unwrap();
    let mut guard = 0;
    while !svc.session(&id).unwrap().complete {
        guard += 1;
        assert!(guard < 100, "study does not terminate");
        let r = svc.post_message(&id, "Let me check that for you right away.").unwrap();
        for p in &r.pending_ratings {
            svc.post_rating(&id, *p, 6).unwrap();
        }
        if r.closed {
            let s = svc.session(&id).unwrap();
            let k = s.finished.len();
            svc.post_survey(&id, survey(SurveyPhase::PostStage(k), s.flow.stages()[k - 1].has_emo_panels())).unwrap();
        }
    }
    id
}

#[test]
fn default_study_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let id = complete_study(&svc, None);
    let events = svc.events(&id).unwrap();
    let panel_updates = events.iter().filter(|e| matches!(e.body, EventBody::PanelUpdate(_))).count();
    // the demo script never closes, so every stage runs to the exchange cap;
    // the closing reply gets no panels
    let per_stage = MAX_EXCHANGES as usize - 1;
    assert_eq!(panel_updates, 3 * per_stage + 3 * per_stage);

    let records = svc.export(&ExportFilter::default()).unwrap();
    let count = |k: RecordKind| records.iter().filter(|r| r.kind() == k).count();
    assert_eq!(count(RecordKind::Incident), 4);
    assert_eq!(count(RecordKind::Rating), panel_updates);
    assert_eq!(count(RecordKind::Survey), 5);
    let rated: BTreeSet<u64> = records
        .iter()
        .filter_map(|r| match r {
            ExportRecord::Rating(r) => Some(r.panel_seq),
            _ => None,
        })
        .collect();
    let updates: BTreeSet<u64> =
        events.iter().filter(|e| matches!(e.body, EventBody::PanelUpdate(_))).map(|e| e.seq).collect();
    assert_eq!(rated, updates);
    for r in &records {
        if let ExportRecord::Incident(i) = r {
            assert_eq!(i.close_reason, CloseReason::TurnCap);
            assert_eq!(i.turns.len(), 1 + 2 * MAX_EXCHANGES as usize);
            assert_eq!(i.turns.turns()[0].speaker, Speaker::Client);
            i.turns.check_invariants().unwrap();
        }
    }
    let pilot = svc.export(&ExportFilter { source: Some(MessageSource::Pilot), ..Default::default() }).unwrap();
    assert_eq!(pilot.len(), per_stage);
    for r in &pilot {
        let ExportRecord::Message(m) = r else { panic!("non-message record {r:?}") };
        let bundle = m.reframe.as_ref().unwrap();
        bundle.check().unwrap();
        assert_eq!(m.text, bundle.reframe_paraphrase);
        assert_eq!(m.stage, 4);
    }
    let human = svc.export(&ExportFilter { source: Some(MessageSource::Human), ..Default::default() }).unwrap();
    assert_eq!(human.len(), 4 * MAX_EXCHANGES as usize);
}

#[test]
fn export_is_a_function_of_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    assert!(svc.export(&ExportFilter::default()).unwrap().is_empty());
    let flow = StudyFlow::new(vec![Stage::new(Persona::Uncivil, &[PanelId::EmoReframe], false)]).unwrap();
    let id = complete_study(&svc, Some(flow));
    let before = svc.export(&ExportFilter::default()).unwrap();
    drop(svc);
    let svc = open(dir.path(), demo_backend());
    assert_eq!(svc.export(&ExportFilter::default()).unwrap(), before);
    let only = svc.export(&ExportFilter { session: Some(id), record: Some(RecordKind::Survey), source: None }).unwrap();
    assert_eq!(only.len(), 2);
    assert!(svc.export(&ExportFilter { session: Some("nope".into()), ..Default::default() }).unwrap().is_empty());
}

#[test]
fn create_session_defaults_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let mut domains = BTreeSet::new();
    for _ in 0..20 {
        let s = svc.create_session(CreateRequest::default()).unwrap();
        assert_eq!(s.flow, StudyFlow::default());
        assert_eq!(s.stage_index, 0);
        assert_eq!(s.conversation.transcript().len(), 1);
        assert_eq!(s.conversation.persona(), Persona::Civil);
        let cats: BTreeSet<Category> = s.stages.iter().map(|c| c.category).collect();
        assert_eq!(cats.len(), 4, "categories rotate across stages");
        assert!(s.stages.iter().all(|c| c.domain == s.stages[0].domain));
        domains.insert(s.stages[0].domain);
    }
    assert_eq!(domains, BTreeSet::from([Domain::Airlines, Domain::Hotels]));

    let spec = ComplaintSpec::new(Domain::Mobile, Category::Policy, 3);
    let s = svc.create_session(CreateRequest { flow: None, spec: Some(spec) }).unwrap();
    assert_eq!(s.stages[0], spec);
    assert_eq!(s.stages[1].category, Category::Resolution);
    assert_eq!(s.stages[2].category, Category::ServiceQuality);

    assert!(serde_json::from_str::<CreateRequest>(r#"{"flow": {"stages": []}}"#).is_err());
}

#[test]
fn rating_gate_and_rating_errors() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let flow =
        StudyFlow::new(vec![Stage::new(Persona::Uncivil, &[PanelId::EmoLabel, PanelId::EmoReframe], false)]).unwrap();
    let id = svc.create_session(CreateRequest { flow: Some(flow), spec: None }).unwrap().id;
    assert_eq!(svc.post_rating(&id, PanelId::EmoLabel, 5), Err(ServiceError::NotPending(PanelId::EmoLabel)));
    let r = svc.post_message(&id, "Could you share your booking number?").unwrap();
    assert_eq!(r.panels.len(), 2);
    assert_eq!(r.pending_ratings, [PanelId::EmoLabel, PanelId::EmoReframe]);
    assert_eq!(
        svc.post_message(&id, "hello?"),
        Err(ServiceError::RatingPending(vec![PanelId::EmoLabel, PanelId::EmoReframe]))
    );
    assert!(matches!(svc.post_rating(&id, PanelId::EmoLabel, 9), Err(ServiceError::Range { value: 9, .. })));
    assert!(matches!(svc.post_rating(&id, PanelId::EmoLabel, 0), Err(ServiceError::Range { .. })));
    assert_eq!(svc.post_rating(&id, PanelId::InfoGuide, 5), Err(ServiceError::NotPending(PanelId::InfoGuide)));
    let ack = svc.post_rating(&id, PanelId::EmoLabel, 5).unwrap();
    assert_eq!(ack.pending_ratings, [PanelId::EmoReframe]);
    assert_eq!(svc.post_rating(&id, PanelId::EmoLabel, 5), Err(ServiceError::NotPending(PanelId::EmoLabel)));
    assert_eq!(svc.post_message(&id, "hello?"), Err(ServiceError::RatingPending(vec![PanelId::EmoReframe])));
    svc.post_rating(&id, PanelId::EmoReframe, 7).unwrap();
    svc.post_message(&id, "hello?").unwrap();
    assert_eq!(svc.post_message("missing", "hi"), Err(ServiceError::NotFound("missing".into())));
    assert!(matches!(svc.post_message(&id, "x"), Err(ServiceError::RatingPending(_))));
}

#[test]
fn single_panel_stage_returns_one_payload() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let id = svc.create_session(CreateRequest::default()).unwrap().id;
    let r = svc.post_message(&id, "Hello, how can I help?").unwrap();
    assert_eq!(r.panels.keys().copied().collect::<Vec<_>>(), [PanelId::InfoGuide]);
    assert!(r.client_reply.is_some());
    assert!(!r.closed);
    assert!(r.cues.len() >= 2);
    assert!(matches!(svc.post_message(&id, "   "), Err(ServiceError::RatingPending(_))));
    svc.post_rating(&id, PanelId::InfoGuide, 4).unwrap();
    assert!(matches!(svc.post_message(&id, "   "), Err(ServiceError::InvalidRequest(_))));
}

#[test]
fn closure_at_cap_advances_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let id = svc.create_session(CreateRequest::default()).unwrap().id;
    for i in 1..=MAX_EXCHANGES {
        let r = svc.post_message(&id, "Checking.").unwrap();
        assert_eq!(r.closed, i == MAX_EXCHANGES);
        assert_eq!(r.stage_advanced, i == MAX_EXCHANGES);
        for p in r.pending_ratings {
            svc.post_rating(&id, p, 3).unwrap();
        }
    }
    let s = svc.session(&id).unwrap();
    assert_eq!(s.stage_index, 1);
    assert_eq!(s.conversation.transcript().len(), 1);
    let kinds: Vec<&str> = svc.events(&id).unwrap().iter().rev().take(2).map(|e| e.body.kind()).collect();
    assert_eq!(kinds, ["stage_advanced", "closed"]);
}

#[test]
fn surveys_follow_the_flow() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let id = svc.create_session(CreateRequest::default()).unwrap().id;
    assert!(matches!(svc.post_survey(&id, survey(SurveyPhase::PostStage(1), false)), Err(ServiceError::Phase(_))));
    svc.post_survey(&id, survey(SurveyPhase::Pre, false)).unwrap();
    assert!(matches!(svc.post_survey(&id, survey(SurveyPhase::Pre, false)), Err(ServiceError::Duplicate(_))));
    let mut bad = survey(SurveyPhase::PostStage(1), false);
    bad.q2_demands = 6;
    assert!(matches!(svc.post_survey(&id, bad), Err(ServiceError::Phase(_))));

    let id = svc.create_session(CreateRequest::default()).unwrap().id;
    let mut bad = survey(SurveyPhase::Pre, false);
    bad.q1_polite = 0;
    assert!(matches!(svc.post_survey(&id, bad), Err(ServiceError::Range { .. })));
    assert!(matches!(svc.post_survey(&id, survey(SurveyPhase::Pre, true)), Err(ServiceError::Phase(_))));
    svc.post_message(&id, "Hi there").unwrap();
    assert!(matches!(svc.post_survey(&id, survey(SurveyPhase::Pre, false)), Err(ServiceError::Phase(_))));
    assert!(matches!(svc.post_survey(&id, survey(SurveyPhase::PostStage(9), false)), Err(ServiceError::Phase(_))));
}

#[test]
fn q4_only_after_emotion_stages() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), demo_backend());
    let id = complete_study(&svc, None);
    let s = svc.session(&id).unwrap();
    assert!(s.surveys[&SurveyPhase::PostStage(4)].q4_support.is_some());
    assert!(s.surveys[&SurveyPhase::PostStage(3)].q4_support.is_none());
    assert_eq!(svc.post_message(&id, "anyone?"), Err(ServiceError::SessionClosed));

    let flow = StudyFlow::new(vec![Stage::new(Persona::Civil, &[], false)]).unwrap();
    let id = svc.create_session(CreateRequest { flow: Some(flow), spec: None }).unwrap().id;
    for _ in 0..MAX_EXCHANGES {
        assert!(svc.post_message(&id, "ok").unwrap().panels.is_empty());
    }
    assert!(matches!(svc.post_survey(&id, survey(SurveyPhase::PostStage(1), true)), Err(ServiceError::Phase(_))));
    svc.post_survey(&id, survey(SurveyPhase::PostStage(1), false)).unwrap();
}
