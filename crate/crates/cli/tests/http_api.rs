use std::sync::Arc;
use std::thread::JoinHandle;

use feedlab_cli::client::HttpApi;
use feedlab_cli::{server, CliError};
use feedlab_core::engine::{
    read_log, ApiError, AttentionAnswers, CreateSessionRequest, Engine, EngineError, EngineParts,
    EventInput, ExperimentApi, ExperimentConfig, LogicalClock, QuestionnaireSubmission, Stage,
};
use feedlab_core::fixtures::{mock_provider, synthetic_dataset};
use feedlab_core::{AttributeSet, EventKind, Judgment, Phase, SessionId};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::sync::oneshot;

struct Running {
    url: String,
    addr: String,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<feedlab_cli::Result<()>>>,
}

impl Running {
    fn shutdown(&mut self) -> feedlab_cli::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.handle.take().map_or(Ok(()), |h| h.join().expect("server thread"))
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

fn engine(dir: &std::path::Path, fsync_every: usize) -> Arc<Engine> {
    let config = ExperimentConfig {
        fsync_every,
        ..ExperimentConfig::default()
    };
    let parts = EngineParts {
        config,
        dataset: Arc::new(synthetic_dataset(20, 20)),
        provider: mock_provider(30),
        reference: None,
        clock: Arc::new(LogicalClock::new(1)),
    };
    Arc::new(Engine::open(dir, parts).unwrap())
}

fn start(engine: Arc<Engine>) -> Running {
    let listener = server::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let (tx, rx) = oneshot::channel();
    let handle = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(server::serve_until(engine, listener, async {
            let _ = rx.await;
        }))
    });
    Running {
        url: format!("http://{addr}"),
        addr,
        stop: Some(tx),
        handle: Some(handle),
    }
}

fn error_body(resp: reqwest::blocking::Response) -> ApiError {
    let v: Value = resp.json().unwrap();
    for field in ["code", "message", "detail"] {
        assert!(v.get(field).is_some(), "error body lacks {field}: {v}");
    }
    serde_json::from_value(v).unwrap()
}

fn to_feed(api: &HttpApi) -> SessionId {
    let view = api.create_session(&CreateSessionRequest::default()).unwrap();
    let id = view.session_id.clone();
    api.advance(&id).unwrap();
    api.advance(&id).unwrap();
    let form = QuestionnaireSubmission {
        self_reported: AttributeSet::parse("conservative, male").unwrap(),
        survey_answers: Vec::new(),
        attention: AttentionAnswers::new(view.min_interactions as i64, view.feed_size as i64),
    };
    let out = api.submit_questionnaire(&id, &form).unwrap();
    assert_eq!(out.stage, Stage::Feed);
    id
}

#[test]
fn session_flow_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let svc = start(engine(dir.path(), 1));
    let api = HttpApi::new(&svc.url).unwrap();
    let http = Client::new();

    let resp = http.post(format!("{}/sessions", svc.url)).send().unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let created: Value = resp.json().unwrap();
    assert_eq!(created["session_id"], "s000001");
    assert_eq!(created["stage"], "consent");

    let id = to_feed(&api);
    let feed = api.feed(&id).unwrap();
    assert_eq!(feed.posts.len(), 5);
    assert!(!feed.can_submit);

    let claim = feed.posts[0].claim_id.clone();
    let step1 = api.step1(&id, &claim).unwrap();
    assert_eq!(step1.options.len(), 3);
    api.post_event(&id, &EventInput::judgment(&claim, Phase::Pre, Judgment::True)).unwrap();
    let step2 = api.step2(&id, &claim).unwrap();
    assert_eq!(step2.claim_id, claim);

    let health = api.health().unwrap();
    assert_eq!(health["sessions"], 2);
    let live = api.live_report().unwrap();
    assert!(live.get("arms").is_some());
}

#[test]
fn errors_have_codes_and_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let svc = start(engine(dir.path(), 1));
    let api = HttpApi::new(&svc.url).unwrap();
    let http = Client::new();

    let resp = http.get(format!("{}/sessions/s999999", svc.url)).send().unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
    assert_eq!(error_body(resp).code, "unknown_session");

    let resp = http.get(format!("{}/no/such/route", svc.url)).send().unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
    error_body(resp);

    let resp = http
        .post(format!("{}/sessions", svc.url))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    assert_eq!(error_body(resp).code, "invalid_input");

    let id = to_feed(&api);
    let claim = api.feed(&id).unwrap().posts[0].claim_id.clone();

    let resp = http
        .get(format!("{}/sessions/{id}/intervention/{claim}/step2", svc.url))
        .send()
        .unwrap();
    assert_eq!(resp.status(), StatusCode::CONFLICT);
    assert_eq!(error_body(resp).code, "phase_violation");

    let resp = http
        .post(format!("{}/sessions/{id}/events", svc.url))
        .json(&json!({"claim_id": claim, "kind": "veracity_judgment", "phase": "pre", "payload": {"rating": 3}}))
        .send()
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    let resp = http
        .get(format!("{}/sessions/{id}/intervention/not-in-feed/step1", svc.url))
        .send()
        .unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
    assert_eq!(error_body(resp).code, "unknown_claim");

    let early = api.submit(&id).unwrap();
    assert!(!early.accepted);
    assert_eq!((early.interacted_claims, early.required), (0, 3));
    assert_eq!(early.stage, Stage::Feed);
    match api.session(&SessionId::new("s424242")) {
        Err(EngineError::UnknownSession { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn second_bind_on_same_port_fails() {
    let dir = tempfile::tempdir().unwrap();
    let svc = start(engine(dir.path(), 1));
    match server::bind(&svc.addr) {
        Err(CliError::Bind { addr, .. }) => assert_eq!(addr, svc.addr),
        other => panic!("expected a bind error, got {other:?}"),
    }
}

#[test]
fn unreachable_service_is_unavailable() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let api = HttpApi::new(&format!("http://{addr}")).unwrap();
    match api.health() {
        Err(EngineError::Unavailable { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn graceful_shutdown_flushes_buffered_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut svc = start(engine(dir.path(), 10_000));
    let api = HttpApi::new(&svc.url).unwrap();
    let id = to_feed(&api);
    let claim = api.feed(&id).unwrap().posts[1].claim_id.clone();
    let ack = api
        .post_event(&id, &EventInput::reaction(&claim, EventKind::Like, Phase::Pre))
        .unwrap();
    svc.shutdown().unwrap();
    let snap = read_log(dir.path()).unwrap();
    assert!(snap.events.iter().any(|e| e.session_id == id && e.seq == ack.seq));
}
