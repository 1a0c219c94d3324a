mod common;

use std::sync::Arc;

use civility_service::http::{router, ErrorBody};
use common::{demo_backend, open};
use serde_json::{json, Value};

struct Server {
    base: String,
    agent: ureq::Agent,
    _dir: tempfile::TempDir,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    fn start(static_dir: Option<std::path::PathBuf>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let svc = Arc::new(open(dir.path(), demo_backend()));
        let rt = tokio::runtime::Runtime::new().unwrap();
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let app = router(svc, static_dir);
        let thread = std::thread::spawn(move || {
            rt.block_on(civility_service::http::serve(listener, app, async {
                let _ = rx.await;
            }))
            .unwrap();
        });
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Server { base, agent, _dir: dir, stop: Some(tx), thread: Some(thread) }
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = self.agent.post(format!("{}{path}", self.base)).send_json(&body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn get(&self, path: &str) -> (u16, String) {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.thread.take().unwrap().join().unwrap();
    }
}

fn code(v: &Value) -> String {
    serde_json::from_value::<ErrorBody>(v.clone()).unwrap().code
}

#[test]
fn study_over_http() {
    let srv = Server::start(None);
    let mut r = srv.agent.post(format!("{}/sessions", srv.base)).send_empty().unwrap();
    assert_eq!(r.status().as_u16(), 201);
    let session: Value = r.body_mut().read_json().unwrap();
    let id = session["id"].as_str().unwrap().to_string();
    assert_eq!(session["stage_count"], 4);
    assert_eq!(session["stage_index"], 0);
    assert!(session["rating_labels"]["info_guide"].is_string());
    assert_eq!(session["conversation"]["transcript"].as_array().unwrap().len(), 1);

    let (status, _) = srv.post(
        &format!("/sessions/{id}/surveys"),
        json!({"phase": "pre", "q1_polite": 4, "q1_dignity": 4, "q1_respect": 4, "q2_demands": 3,
               "q2_resources": 3, "q3_pleasure": 3, "q3_energy": 3}),
    );
    assert_eq!(status, 200);

    let (status, body) = srv.post(&format!("/sessions/{id}/messages"), json!({"text": "Hello, how can I help?"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["closed"], false);
    assert_eq!(body["panels"]["info_guide"]["panel"], "info_guide");
    assert!(body["client_reply"].is_string());
    assert_eq!(body["pending_ratings"], json!(["info_guide"]));

    let (status, body) = srv.post(&format!("/sessions/{id}/messages"), json!({"text": "Still there?"}));
    assert_eq!((status, code(&body).as_str()), (409, "RATING_PENDING"));
    let (status, body) = srv.post(&format!("/sessions/{id}/ratings"), json!({"panel": "info_guide", "score": 9}));
    assert_eq!((status, code(&body).as_str()), (422, "OUT_OF_RANGE"));
    let (status, body) = srv.post(&format!("/sessions/{id}/ratings"), json!({"panel": "emo_label", "score": 3}));
    assert_eq!((status, code(&body).as_str()), (409, "NOT_PENDING"));
    let (status, body) = srv.post(&format!("/sessions/{id}/ratings"), json!({"panel": "info_guide", "score": 6}));
    assert_eq!(status, 200);
    assert_eq!(body["pending_ratings"], json!([]));

    let (status, body) = srv.post(&format!("/sessions/{id}/messages"), json!({"txt": "typo"}));
    assert_eq!((status, code(&body).as_str()), (400, "INVALID_REQUEST"));
    let (status, body) = srv.post("/sessions/nope/messages", json!({"text": "hi"}));
    assert_eq!((status, code(&body).as_str()), (404, "NOT_FOUND"));
    let (status, body) = srv.post("/sessions", json!({"flow": {"stages": []}}));
    assert_eq!((status, code(&body).as_str()), (400, "INVALID_REQUEST"));
    let (status, body) = srv.post("/sessions", json!({"spec": {"domain": "mobile", "category": "policy", "seed": 3}}));
    assert_eq!(status, 201);
    assert_eq!(body["stages"][0], json!({"domain": "mobile", "category": "policy", "seed": 3}));

    let (status, text) = srv.get(&format!("/sessions/{id}/transcript"));
    assert_eq!(status, 200);
    let t: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(t["stages"][0]["turns"].as_array().unwrap().len(), 3);

    let (status, text) = srv.get("/export?record=survey");
    assert_eq!(status, 200);
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["record"], "survey");
    let (_, text) = srv.get("/export?source=human");
    assert_eq!(text.lines().count(), 1);
    let (status, text) = srv.get("/export?record=bogus");
    assert_eq!(status, 400, "{text}");
    let (status, text) = srv.get("/nowhere");
    assert_eq!(status, 404);
    assert_eq!(code(&serde_json::from_str(&text).unwrap()), "NOT_FOUND");
}

#[test]
fn static_route_serves_ui_assets() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>ui</html>").unwrap();
    let srv = Server::start(Some(ui.path().to_path_buf()));
    assert_eq!(srv.get("/index.html"), (200, "<html>ui</html>".to_string()));
    assert_eq!(srv.get("/"), (200, "<html>ui</html>".to_string()));
    assert_eq!(srv.get("/sessions/none").0, 404);
}
