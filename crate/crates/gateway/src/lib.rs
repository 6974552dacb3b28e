//! Network surface for the conversational agent: one WebSocket session per
//! connection, stateless lip-sync endpoints, and the `eca` command line.

pub mod cli;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use eca_core::eliza::ElizaScript;
use eca_core::expression::PresetTable;
use eca_core::lipsync::{analyze_pcm, LipsyncConfig, LipsyncError, PcmFormat, VisemeFrame};
use eca_core::metrics::{MetricsSink, MetricsSummary};
use eca_core::protocol::{GatewaySession, ServerMessage};
use eca_core::session::{Session, SessionConfig};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

/// Everything shared by all connections. Only the metrics sink is mutable.
#[derive(Debug, Clone)]
pub struct AppState {
    pub script: Arc<ElizaScript>,
    pub presets: Arc<PresetTable>,
    pub lipsync: Arc<LipsyncConfig>,
    pub session: SessionConfig,
    pub metrics: Arc<MetricsSink>,
}

impl AppState {
    pub fn new(script: ElizaScript, presets: PresetTable, lipsync: LipsyncConfig, session: SessionConfig) -> Self {
        Self {
            script: Arc::new(script),
            presets: Arc::new(presets),
            lipsync: Arc::new(lipsync),
            session,
            metrics: Arc::new(MetricsSink::default()),
        }
    }

    pub fn new_session(&self) -> GatewaySession {
        let session = Session::new(
            Arc::clone(&self.script),
            Arc::clone(&self.presets),
            self.session.clone(),
        );
        GatewaySession::new(session).with_sink(Arc::clone(&self.metrics))
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new(
            ElizaScript::doctor(),
            PresetTable::default(),
            LipsyncConfig::default(),
            SessionConfig::default(),
        )
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let router = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/health", get(|| async { "ok" }))
        .route("/metrics", get(metrics))
        .route("/lipsync", post(lipsync_json))
        .route("/lipsync/raw", post(lipsync_raw))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state);
    match static_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    }
}

/// Serves until `shutdown` resolves, then lets in-flight connections finish.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    static_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "listening");
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, state.new_session()))
}

async fn send_all(socket: &mut WebSocket, messages: Vec<ServerMessage>) -> Result<bool, axum::Error> {
    let mut ended = false;
    for msg in messages {
        ended |= matches!(msg, ServerMessage::SessionEnd { .. });
        socket.send(Message::Text(msg.encode())).await?;
    }
    Ok(ended)
}

async fn run_socket(mut socket: WebSocket, mut session: GatewaySession) {
    if send_all(&mut socket, session.start()).await.is_err() {
        return;
    }
    while let Some(Ok(msg)) = socket.recv().await {
        let replies = match msg {
            Message::Text(text) => session.handle_message(&text),
            Message::Binary(_) => vec![ServerMessage::error("bad_message", "binary frames are not supported")],
            Message::Ping(_) | Message::Pong(_) => continue,
            Message::Close(_) => break,
        };
        match send_all(&mut socket, replies).await {
            Ok(true) => {
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
            Ok(false) => {}
            Err(e) => {
                tracing::debug!("connection dropped: {e}");
                break;
            }
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum MetricsBody {
    Summary(MetricsSummary),
    Empty { count: usize },
}

async fn metrics(State(state): State<AppState>) -> Json<MetricsBody> {
    Json(match state.metrics.summary() {
        Ok(summary) => MetricsBody::Summary(summary),
        Err(_) => MetricsBody::Empty { count: 0 },
    })
}

/// Base64 PCM inside a JSON body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipsyncRequest {
    pub format: PcmFormat,
    pub sample_rate: u32,
    pub pcm_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipsyncResponse {
    pub frames: Vec<VisemeFrame>,
}

#[derive(Debug, Deserialize)]
struct RawParams {
    format: String,
    sample_rate: u32,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ServerMessage::error(self.code, self.detail))).into_response()
    }
}

impl From<LipsyncError> for ApiError {
    fn from(e: LipsyncError) -> Self {
        let code = match e {
            LipsyncError::UnsupportedFormat(_) => "unsupported_format",
            LipsyncError::SampleRateTooLow(_) | LipsyncError::SampleRateMismatch { .. } => "rate_mismatch",
            _ => "bad_request",
        };
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code,
            detail: e.to_string(),
        }
    }
}

async fn lipsync_json(
    State(state): State<AppState>,
    body: Result<Json<LipsyncRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<LipsyncResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        code: "bad_message",
        detail: e.body_text(),
    })?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(req.pcm_base64.as_bytes())
        .map_err(|e| ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_message",
            detail: format!("pcm_base64: {e}"),
        })?;
    let frames = analyze_pcm(&bytes, req.format, req.sample_rate, &state.lipsync)?;
    Ok(Json(LipsyncResponse { frames }))
}

async fn lipsync_raw(
    State(state): State<AppState>,
    params: Result<Query<RawParams>, axum::extract::rejection::QueryRejection>,
    body: Bytes,
) -> Result<Json<LipsyncResponse>, ApiError> {
    let Query(params) = params.map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        code: "bad_message",
        detail: e.body_text(),
    })?;
    let format: PcmFormat = params.format.parse()?;
    let frames = analyze_pcm(&body, format, params.sample_rate, &state.lipsync)?;
    Ok(Json(LipsyncResponse { frames }))
}
