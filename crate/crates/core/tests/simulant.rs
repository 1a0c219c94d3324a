use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use civility_core::llm::{
    demo_script, user_content, CompletionParams, CountingBackend, FnBackend, LlmError, ScriptRule, ScriptedBackend,
};
use civility_core::simulant::{
    apply_variation, client_turn, create_incident, full_matrix, generate_cues, read_incidents, write_incidents,
    Behavioral, Category, CloseReason, ComplaintSpec, ConversationState, Domain, Persona, SimError, Speaker,
    MAX_EXCHANGES, SENTINEL,
};
use civility_core::{Assets, ChainContext};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scripted(rules: &[(&str, &str)]) -> ScriptedBackend {
    let mut all: Vec<ScriptRule> = rules.iter().map(|(m, r)| ScriptRule::new(*m, *r)).collect();
    all.extend(demo_script());
    ScriptedBackend::new(&all).unwrap()
}

fn open_state() -> ConversationState {
    ConversationState::new(Persona::Uncivil, "When the hell can I expect my baggage?").unwrap()
}

#[test]
fn incident_has_five_alternating_turns() {
    let assets = Assets::builtin();
    let backend = CountingBackend::new(scripted(&[]));
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let spec = ComplaintSpec::new(Domain::Airlines, Category::ProductIssues, 1);
    let incident = create_incident(&ctx, spec).unwrap();
    incident.check().unwrap();
    let speakers: Vec<Speaker> = incident.transcript.turns().iter().map(|t| t.speaker).collect();
    assert_eq!(
        speakers,
        [Speaker::Client, Speaker::Representative, Speaker::Client, Speaker::Representative, Speaker::Client]
    );
    // complaint; first rep reply has no history to contextualize; then
    // contextualize + client, contextualize + rep, contextualize + client
    assert_eq!(backend.calls(), 1 + 1 + 2 + 2 + 2);
    assert_eq!(create_incident(&ctx, spec).unwrap(), incident);
}

#[test]
fn complaint_prompt_uses_sampled_exemplars_and_spec() {
    let assets = Assets::builtin();
    let seen = Mutex::new(Vec::new());
    let backend = FnBackend(|m: &[_], _: &CompletionParams| {
        let text = user_content(m);
        seen.lock().unwrap().push(text.clone());
        Ok(ScriptedBackend::new(&demo_script())?.respond(&text).to_string())
    });
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    create_incident(&ctx, ComplaintSpec::new(Domain::Hotels, Category::Policy, 4)).unwrap();
    let first = seen.lock().unwrap()[0].clone();
    assert!(first.contains("Generate a realistic initial complaint from a customer in a Hotel setting."));
    assert!(first.trim_end().ends_with("Category: Policy\nDomain: Hotel\nComplaint:"));
    assert_eq!(first.matches("Category: ").count(), 4);
}

#[test]
fn sentinel_at_turn_two_twice_is_a_structure_error() {
    let assets = Assets::builtin();
    let backend = scripted(&[("UNCIVIL customer", "FINISH:999")]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let err = create_incident(&ctx, ComplaintSpec::new(Domain::Mobile, Category::Resolution, 0)).unwrap_err();
    assert!(matches!(err, SimError::Structure(ref m) if m.contains("turn 2")), "{err:?}");
}

#[test]
fn sentinel_once_is_regenerated() {
    let assets = Assets::builtin();
    let demo = ScriptedBackend::new(&demo_script()).unwrap();
    let client_calls = AtomicUsize::new(0);
    let backend = FnBackend(|m: &[_], _: &CompletionParams| {
        let text = user_content(m);
        if text.contains("UNCIVIL customer") && client_calls.fetch_add(1, Ordering::SeqCst) == 0 {
            return Ok("FINISH:999".to_string());
        }
        Ok(demo.respond(&text).to_string())
    });
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let incident = create_incident(&ctx, ComplaintSpec::new(Domain::Airlines, Category::Policy, 2)).unwrap();
    incident.check().unwrap();
    assert_eq!(client_calls.load(Ordering::SeqCst), 3);
}

#[test]
fn backend_errors_propagate() {
    let assets = Assets::builtin();
    let backend = FnBackend(|_: &[_], _: &CompletionParams| Err(LlmError::Auth { status: 401 }));
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    assert_eq!(
        create_incident(&ctx, ComplaintSpec::new(Domain::Airlines, Category::Policy, 2)),
        Err(SimError::Llm(LlmError::Auth { status: 401 }))
    );
    let state = open_state();
    assert_eq!(client_turn(&ctx, &state, "hello"), Err(SimError::Llm(LlmError::Auth { status: 401 })));
}

#[test]
fn sentinel_alone_closes_without_reply() {
    let assets = Assets::builtin();
    let backend = scripted(&[("UNCIVIL customer", "FINISH:999")]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let out = client_turn(&ctx, &open_state(), "Is there anything else?").unwrap();
    assert_eq!(out.reply, None);
    assert!(out.state.is_closed());
    assert_eq!(out.state.close_reason(), Some(CloseReason::Sentinel));
    assert_eq!(client_turn(&ctx, &out.state, "hello?"), Err(SimError::Closed));
}

#[test]
fn sentinel_suffix_is_stripped() {
    let assets = Assets::builtin();
    let backend = scripted(&[("UNCIVIL customer", "Fine, whatever. FINISH:999")]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let out = client_turn(&ctx, &open_state(), "Your refund is on its way.").unwrap();
    assert_eq!(out.reply.as_deref(), Some("Fine, whatever."));
    assert_eq!(out.state.close_reason(), Some(CloseReason::Sentinel));
    assert_eq!(out.state.transcript().last().unwrap().text, "Fine, whatever.");
}

#[test]
fn twelfth_exchange_hits_the_cap() {
    let assets = Assets::builtin();
    let backend = scripted(&[]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let mut state = open_state();
    for i in 1..=12 {
        let out = client_turn(&ctx, &state, "Let me check on that.").unwrap();
        assert!(out.reply.is_some());
        state = out.state;
        assert_eq!(state.is_closed(), i == 12);
    }
    assert_eq!(state.close_reason(), Some(CloseReason::TurnCap));
    assert_eq!(client_turn(&ctx, &state, "One more thing"), Err(SimError::Closed));
}

#[test]
fn civil_persona_uses_polite_prompt() {
    let assets = Assets::builtin();
    let backend = scripted(&[]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let state = ConversationState::new(Persona::Civil, "Hello, my order is late.").unwrap();
    let out = client_turn(&ctx, &state, "Could I have your order number?").unwrap();
    assert_eq!(out.reply.as_deref(), Some("Thank you, my reference is ABC123."));
}

#[test]
fn cues() {
    let assets = Assets::builtin();
    let params = CompletionParams::default();
    let two = scripted(&[("Suggest short phrases", "Apologize for the delay\nOffer a refund")]);
    let ctx = ChainContext { assets: &assets, backend: &two, params: &params };
    assert_eq!(generate_cues(&ctx, &open_state()).unwrap(), ["Apologize for the delay", "Offer a refund"]);

    let five = scripted(&[("Suggest short phrases", "a\nb\nc\nd\ne")]);
    let ctx = ChainContext { assets: &assets, backend: &five, params: &params };
    assert_eq!(generate_cues(&ctx, &open_state()).unwrap(), ["a", "b", "c"]);

    let one = CountingBackend::new(scripted(&[("Suggest short phrases", "just one line")]));
    let ctx = ChainContext { assets: &assets, backend: &one, params: &params };
    assert!(matches!(generate_cues(&ctx, &open_state()), Err(SimError::CueParse(_))));
    assert_eq!(one.calls(), 2);

    let closed = open_state().resolve().unwrap();
    assert_eq!(generate_cues(&ctx, &closed), Err(SimError::Closed));
}

#[test]
fn variation_copies_incident() {
    let assets = Assets::builtin();
    let backend = scripted(&[]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let incident = create_incident(&ctx, ComplaintSpec::new(Domain::Hotels, Category::ServiceQuality, 0)).unwrap();
    let varied = apply_variation(&incident, Some(Behavioral::Focused), None).unwrap();
    assert!(incident.variation.is_none());
    assert_eq!(varied.transcript, incident.transcript);
    assert!(varied.variation.unwrap().rendered_text.starts_with("The conversation takes place about 2 hours"));
    assert_eq!(apply_variation(&incident, None, None), Err(SimError::NoContext));
}

#[test]
fn incident_jsonl_round_trip() {
    let assets = Assets::builtin();
    let backend = scripted(&[]);
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
    let incidents: Vec<_> = full_matrix(0..1).into_iter().take(4).map(|s| create_incident(&ctx, s).unwrap()).collect();
    let mut buf = Vec::new();
    write_incidents(&mut buf, &incidents).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["spec"]["domain"], "airlines");
    assert_eq!(first["spec"]["category"], "service_quality");
    assert_eq!(first["spec"]["seed"], 0);
    assert!(first["variation"].is_null());
    assert_eq!(first["turns"][0]["speaker"], "client");
    assert_eq!(first["turns"][4]["index"], 4);
    assert_eq!(read_incidents(buf.as_slice()).unwrap(), incidents);
    assert!(matches!(read_incidents("{}\n".as_bytes()), Err(SimError::InvalidRecord { line: 1, .. })));
}

/// Backend answering client prompts with random text, sometimes carrying
/// the sentinel in various positions.
fn random_client(
    seed: u64,
) -> impl Fn(&[civility_core::llm::PromptMessage], &CompletionParams) -> Result<String, LlmError> {
    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
    move |m, _| {
        let text = user_content(m);
        if text.contains("standalone question") {
            return Ok("What do you need?".into());
        }
        let mut rng = rng.lock().unwrap();
        let words = ["no", "fix it", "ugh", "refund now", "\"", " ", "FINISH:99", "finish:999"];
        let body: String = (0..rng.random_range(0..4)).map(|_| words[rng.random_range(0..words.len())]).collect();
        Ok(match rng.random_range(0..10) {
            0 => SENTINEL.to_string(),
            1 => format!("{body} {SENTINEL}"),
            2 => format!("{body} {SENTINEL} {body}"),
            3 => format!("\"{SENTINEL}\""),
            _ => format!("{body}x"),
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closure_fuzz(seed in any::<u64>(), civil in any::<bool>()) {
        let assets = Assets::builtin();
        let backend = FnBackend(random_client(seed));
        let params = CompletionParams::default();
        let ctx = ChainContext { assets: &assets, backend: &backend, params: &params };
        let persona = if civil { Persona::Civil } else { Persona::Uncivil };
        let mut state = ConversationState::new(persona, "My phone is broken").unwrap();
        let mut calls = 0;
        while !state.is_closed() {
            let out = client_turn(&ctx, &state, "How can I help?").unwrap();
            calls += 1;
            if let Some(reply) = &out.reply {
                prop_assert!(!reply.contains(SENTINEL));
            }
            state = out.state;
            state.transcript().check_invariants().unwrap();
            prop_assert!(state.exchange_count() <= MAX_EXCHANGES);
            prop_assert!(calls <= MAX_EXCHANGES);
        }
        prop_assert!(state.close_reason().is_some());
        prop_assert!(state.transcript().turns().iter().all(|t| !t.text.contains(SENTINEL)));
        prop_assert_eq!(client_turn(&ctx, &state, "hello?"), Err(SimError::Closed));
    }
}
