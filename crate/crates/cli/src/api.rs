//! HTTP JSON API over a corpus store.
//!
//! Validation handlers read one snapshot each; the admin ingest handler goes
//! through the store's writer lock and persists the result when the service
//! was started from a store directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use solembed::detectors::{validate_contract, ValidationReport, DEFAULT_TOP_K};
use solembed::ingestion::{update_model, FsProvider, ModelUpdate, DEFAULT_RETRAIN_ADVISORY};
use solembed::similarity::{MatrixCache, Thresholds};
use solembed::store::{CorpusStore, Manifest};

pub const ADMIN_TOKEN_ENV: &str = "SOLEMBED_ADMIN_TOKEN";
pub const ADMIN_HEADER: &str = "x-admin-token";
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_SOURCE_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub details: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = Some(details);
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub thresholds: Thresholds,
    pub top_k: usize,
    pub max_source_bytes: usize,
    pub admin_token: Option<String>,
    /// Where the store is saved after an admin ingest.
    pub store_dir: Option<PathBuf>,
    pub retrain_advisory: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            top_k: DEFAULT_TOP_K,
            max_source_bytes: DEFAULT_MAX_SOURCE_BYTES,
            admin_token: None,
            store_dir: None,
            retrain_advisory: DEFAULT_RETRAIN_ADVISORY,
        }
    }
}

pub struct AppState {
    store: CorpusStore,
    cache: MatrixCache,
    config: ServiceConfig,
    ingest_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(store: CorpusStore, config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            store,
            cache: MatrixCache::new(),
            config,
            ingest_lock: tokio::sync::Mutex::new(()),
        })
    }

    pub fn store(&self) -> &CorpusStore {
        &self.store
    }

    pub fn cache(&self) -> &MatrixCache {
        &self.cache
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub source: String,
    #[serde(default)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestRequest {
    pub dir: String,
    #[serde(default)]
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    #[serde(flatten)]
    pub manifest: Manifest,
    pub clone_threshold: f64,
    pub bug_threshold: f64,
    pub top_k: usize,
}

impl StatsResponse {
    pub fn new(manifest: Manifest, thresholds: Thresholds, top_k: usize) -> Self {
        Self {
            manifest,
            clone_threshold: thresholds.clone_threshold,
            bug_threshold: thresholds.bug_threshold,
            top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugSummary {
    pub bug_id: String,
    pub category: String,
    pub description: String,
    pub provenance: String,
    pub statements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugsResponse {
    pub corpus_version: u64,
    pub categories: Vec<String>,
    pub bugs: Vec<BugSummary>,
}

pub fn router(state: Arc<AppState>) -> Router {
    // a source at the limit, every byte escaped
    let body_limit = state
        .config
        .max_source_bytes
        .saturating_mul(6)
        .saturating_add(4096);
    Router::new()
        .route("/api/validate", post(validate))
        .route("/api/stats", get(stats))
        .route("/api/bugs", get(bugs))
        .route("/api/corpus/ingest", post(ingest))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed on this endpoint",
    )
}

fn read_body(body: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    body.map_err(|r| {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "too_large",
                "request body too large",
            )
        } else {
            ApiError::bad_request(r.body_text())
        }
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::bad_request(format!("malformed JSON body: {e}"))
            .with_details(json!({ "line": e.line(), "column": e.column() }))
    })
}

async fn validate(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<ValidationReport>, ApiError> {
    let body = read_body(body)?;
    let req: ValidateRequest = parse_json(&body)?;
    let limit = state.config.max_source_bytes;
    if req.source.len() > limit {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too_large",
            format!("source is {} bytes, limit is {limit}", req.source.len()),
        )
        .with_details(json!({ "size": req.source.len(), "limit": limit })));
    }
    let k = req.top_k.unwrap_or(state.config.top_k);
    if k == 0 {
        return Err(ApiError::bad_request("top_k must be at least 1"));
    }
    let snapshot = state.store.snapshot();
    let report = tokio::task::spawn_blocking(move || {
        validate_contract(
            &req.source,
            &snapshot,
            &state.cache,
            state.config.thresholds,
            k,
        )
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(report))
}

async fn stats(State(state): State<Arc<AppState>>) -> Json<StatsResponse> {
    let snapshot = state.store.snapshot();
    Json(StatsResponse::new(
        snapshot.manifest(),
        state.config.thresholds,
        state.config.top_k,
    ))
}

async fn bugs(State(state): State<Arc<AppState>>) -> Json<BugsResponse> {
    let snapshot = state.store.snapshot();
    Json(BugsResponse {
        corpus_version: snapshot.version(),
        categories: snapshot.categories().to_vec(),
        bugs: snapshot
            .bugs()
            .iter()
            .map(|b| BugSummary {
                bug_id: b.bug_id.clone(),
                category: b.category.clone(),
                description: b.description.clone(),
                provenance: b.provenance.clone(),
                statements: b.statement_streams.len(),
            })
            .collect(),
    })
}

fn token_matches(expected: &str, given: &[u8]) -> bool {
    let expected = expected.as_bytes();
    expected.len() == given.len()
        && expected
            .iter()
            .zip(given)
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let unauthorized = |m: &str| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", m);
    let Some(expected) = state.config.admin_token.as_deref() else {
        return Err(unauthorized(
            "admin endpoints are disabled: no admin token configured",
        ));
    };
    match headers.get(ADMIN_HEADER) {
        Some(v) if token_matches(expected, v.as_bytes()) => Ok(()),
        _ => Err(unauthorized("missing or wrong admin token")),
    }
}

async fn ingest(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<ModelUpdate>, ApiError> {
    authorize(&state, &headers)?;
    let body = read_body(body)?;
    let req: IngestRequest = parse_json(&body)?;
    let dir = PathBuf::from(&req.dir);
    if !dir.is_dir() {
        return Err(ApiError::bad_request(format!(
            "{} is not a directory",
            req.dir
        )));
    }
    let provider = match &req.pattern {
        Some(p) => {
            FsProvider::with_pattern(&dir, p).map_err(|e| ApiError::bad_request(e.to_string()))?
        }
        None => FsProvider::new(&dir),
    };
    let _guard = state.ingest_lock.lock().await;
    let st = Arc::clone(&state);
    let update = tokio::task::spawn_blocking(move || -> Result<ModelUpdate, ApiError> {
        let update = update_model(&provider, &st.store, st.config.retrain_advisory)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        if let Some(out) = &st.config.store_dir {
            if update.delta.added > 0 {
                save(&st.store, out)?;
            }
        }
        Ok(update)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(update))
}

fn save(store: &CorpusStore, dir: &Path) -> Result<(), ApiError> {
    store
        .snapshot()
        .save(dir)
        .map_err(|e| ApiError::internal(format!("ingested but not saved: {e}")))
}
