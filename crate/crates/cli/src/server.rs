//! HTTP front end for an [`Engine`].
//!
//! Every body is JSON. Failures carry `{code, message, detail}`.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use feedlab_core::engine::{
    ApiError, CreateSessionRequest, Engine, EngineError, EventInput, ExperimentApi,
    QuestionnaireSubmission,
};
use feedlab_core::{ClaimId, SessionId};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};

pub fn status_for(err: &EngineError) -> StatusCode {
    match err {
        EngineError::UnknownSession { .. } | EngineError::UnknownClaim { .. } => StatusCode::NOT_FOUND,
        EngineError::WrongStage { .. }
        | EngineError::SessionClosed { .. }
        | EngineError::PhaseViolation { .. }
        | EngineError::OutOfOrder { .. } => StatusCode::CONFLICT,
        EngineError::SessionMismatch { .. }
        | EngineError::MalformedPayload { .. }
        | EngineError::InvalidInput { .. } => StatusCode::BAD_REQUEST,
        EngineError::Generation { .. } => StatusCode::BAD_GATEWAY,
        EngineError::DatasetTooSmall { .. } | EngineError::Storage { .. } => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        EngineError::Unavailable { .. } => StatusCode::SERVICE_UNAVAILABLE,
    }
}

fn error_response(err: &EngineError) -> Response {
    if matches!(err, EngineError::Storage { .. } | EngineError::Generation { .. }) {
        tracing::error!(code = %err.code(), "{err}");
    }
    (status_for(err), Json(err.to_api())).into_response()
}

fn bad_body(rejection: JsonRejection) -> Response {
    error_response(&EngineError::InvalidInput {
        message: rejection.body_text(),
    })
}

type Shared = Arc<Engine>;

// Engine calls may fsync, so they run on the blocking pool.
async fn call<T, F>(engine: Shared, status: StatusCode, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&engine)).await {
        Ok(Ok(value)) => (status, Json(value)).into_response(),
        Ok(Err(err)) => error_response(&err),
        Err(join) => error_response(&EngineError::Unavailable {
            message: join.to_string(),
        }),
    }
}

async fn create_session(
    State(engine): State<Shared>,
    body: Bytes,
) -> Response {
    // the body is optional
    let req = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSessionRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => {
                return error_response(&EngineError::InvalidInput {
                    message: e.to_string(),
                })
            }
        }
    };
    call(engine, StatusCode::CREATED, move |e| e.create_session(&req)).await
}

async fn get_session(State(engine): State<Shared>, Path(id): Path<String>) -> Response {
    call(engine, StatusCode::OK, move |e| e.session(&SessionId::new(id))).await
}

async fn get_feed(State(engine): State<Shared>, Path(id): Path<String>) -> Response {
    call(engine, StatusCode::OK, move |e| e.feed(&SessionId::new(id))).await
}

async fn advance(State(engine): State<Shared>, Path(id): Path<String>) -> Response {
    call(engine, StatusCode::OK, move |e| e.advance(&SessionId::new(id))).await
}

async fn questionnaire(
    State(engine): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<QuestionnaireSubmission>, JsonRejection>,
) -> Response {
    let form = match body {
        Ok(Json(f)) => f,
        Err(r) => return bad_body(r),
    };
    call(engine, StatusCode::OK, move |e| {
        e.submit_questionnaire(&SessionId::new(id), &form)
    })
    .await
}

async fn post_event(
    State(engine): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<EventInput>, JsonRejection>,
) -> Response {
    let event = match body {
        Ok(Json(ev)) => ev,
        Err(r) => return bad_body(r),
    };
    call(engine, StatusCode::OK, move |e| e.post_event(&SessionId::new(id), &event)).await
}

async fn step1(State(engine): State<Shared>, Path((id, claim)): Path<(String, String)>) -> Response {
    call(engine, StatusCode::OK, move |e| {
        e.step1(&SessionId::new(id), &ClaimId::new(claim))
    })
    .await
}

async fn step2(State(engine): State<Shared>, Path((id, claim)): Path<(String, String)>) -> Response {
    call(engine, StatusCode::OK, move |e| {
        e.step2(&SessionId::new(id), &ClaimId::new(claim))
    })
    .await
}

async fn submit(State(engine): State<Shared>, Path(id): Path<String>) -> Response {
    call(engine, StatusCode::OK, move |e| e.submit(&SessionId::new(id))).await
}

async fn health(State(engine): State<Shared>) -> Response {
    Json(json!({"status": "ok", "sessions": engine.session_count()})).into_response()
}

async fn live_report(State(engine): State<Shared>) -> Response {
    call(engine, StatusCode::OK, |e| {
        Ok(json!({"sessions": e.session_count(), "arms": e.live_report()}))
    })
    .await
}

async fn not_found() -> Response {
    let body = ApiError {
        code: "not_found".into(),
        message: "no such route".into(),
        detail: serde_json::Value::Null,
    };
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/reports/live", get(live_report))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/feed", get(get_feed))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/questionnaire", post(questionnaire))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/intervention/{claim_id}/step1", get(step1))
        .route("/sessions/{id}/intervention/{claim_id}/step2", get(step2))
        .route("/sessions/{id}/submit", post(submit))
        .fallback(not_found)
        .with_state(engine)
}

/// Bind synchronously so a taken port is reported before anything starts.
pub fn bind(addr: &str) -> Result<std::net::TcpListener> {
    let listener = std::net::TcpListener::bind(addr).map_err(|source| CliError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    listener
        .set_nonblocking(true)
        .map_err(|e| CliError::io("configure", addr, e))?;
    Ok(listener)
}

/// Serve until `shutdown` resolves, then flush the log.
pub async fn serve_until(
    engine: Arc<Engine>,
    listener: std::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let addr = listener.local_addr().map_err(|e| CliError::io("inspect", "listener", e))?;
    let listener =
        tokio::net::TcpListener::from_std(listener).map_err(|e| CliError::io("listen on", addr.to_string(), e))?;
    axum::serve(listener, router(engine.clone()))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| CliError::io("serve on", addr.to_string(), e))?;
    engine.sync()?;
    tracing::info!("log flushed");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

/// Run the service on its own runtime until Ctrl-C or SIGTERM.
/// `on_ready` gets the bound address once the socket is listening.
pub fn run(engine: Arc<Engine>, listener: std::net::TcpListener, on_ready: impl FnOnce(SocketAddr)) -> Result<()> {
    let addr = listener.local_addr().map_err(|e| CliError::io("inspect", "listener", e))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io("start", "runtime", e))?;
    on_ready(addr);
    runtime.block_on(serve_until(engine, listener, shutdown_signal()))
}
