//! Read-only JSON API over the store, versioned under `/v1`.

mod openapi;
mod params;

use axum::extract::{RawQuery, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;
use tower_http::services::ServeDir;

use newsky_core::analytics::hashtags::{HashtagEdge, HashtagNode};
use newsky_core::analytics::{
    hashtag_graph_for_window, orientation_for_window, rank_frequency_for_window, stored_audiences, MixedPolicy,
    RankClass,
};
use newsky_core::ratings::RatingsHandle;
use newsky_core::store::{Dedup, Granularity, KindSet, Store, StoreError, StoreStatus};
use newsky_core::timefmt::{TimeRange, WindowError};

use params::Params;

pub use openapi::openapi_document;

pub const CACHE_CONTROL: &str = "public, max-age=60";
pub const MAX_TOP_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    RangeTooLarge(String),
    #[error("{0}")]
    NotReady(String),
    #[error("store: {0}")]
    Store(StoreError),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::RangeTooLarge { .. } => ApiError::RangeTooLarge(e.to_string()),
            other => ApiError::Store(other),
        }
    }
}

impl From<WindowError> for ApiError {
    fn from(e: WindowError) -> Self {
        ApiError::BadRequest(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::RangeTooLarge(_) => StatusCode::RANGE_NOT_SATISFIABLE,
            ApiError::NotReady(_) => StatusCode::CONFLICT,
            ApiError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub ratings: Arc<RatingsHandle>,
    pub max_buckets: u64,
}

impl AppState {
    pub fn new(store: Arc<Store>, ratings: Arc<RatingsHandle>, max_buckets: u64) -> Self {
        Self { store, ratings, max_buckets }
    }
}

/// All `/v1` routes, plus static files from `static_dir` for any other
/// path when given.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/v1/prevalence", get(prevalence))
        .route("/v1/domains/top", get(top_domains))
        .route("/v1/hashtag-graph", get(hashtag_graph))
        .route("/v1/audiences", get(audiences))
        .route("/v1/orientation", get(orientation))
        .route("/v1/health", get(health))
        .route("/v1/openapi.json", get(openapi))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

fn cached<T: Serialize>(body: T) -> Response {
    let mut response = Json(body).into_response();
    response.headers_mut().insert(header::CACHE_CONTROL, HeaderValue::from_static(CACHE_CONTROL));
    response
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.expect("query task panicked")
}

async fn prevalence(State(state): State<AppState>, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let p = Params::parse(q.as_deref(), &["mode", "granularity", "from", "to", "kinds", "dedup"])?;
    let relative = match p.get("mode").unwrap_or("absolute") {
        "absolute" => false,
        "relative" => true,
        other => return Err(ApiError::BadRequest(format!("mode must be absolute or relative, got {other:?}"))),
    };
    let granularity: Granularity = p.parsed_or("granularity", Granularity::Hour)?;
    let kinds: KindSet = p.parsed_or("kinds", KindSet::ALL)?;
    let dedup: Dedup = p.parsed_or("dedup", Dedup::PerLink)?;
    let from = p.time("from")?.ok_or_else(|| ApiError::BadRequest("from is required".into()))?;
    let to = p.time("to")?.ok_or_else(|| ApiError::BadRequest("to is required".into()))?;
    let range = TimeRange::new(from, to)?;
    let ratings = state.ratings.snapshot();
    blocking(move || {
        let store = &state.store;
        Ok(if relative {
            cached(store.query_relative(range, granularity, dedup, kinds, &ratings, state.max_buckets)?)
        } else {
            cached(store.query_absolute(range, granularity, dedup, kinds, &ratings, state.max_buckets)?)
        })
    })
    .await
}

async fn top_domains(State(state): State<AppState>, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let p = Params::parse(q.as_deref(), &["class", "limit", "window"])?;
    let class: RankClass = p.parsed_or("class", RankClass::All)?;
    let limit: usize = p.parsed_or("limit", 10)?;
    if !(1..=MAX_TOP_LIMIT).contains(&limit) {
        return Err(ApiError::BadRequest(format!("limit must be between 1 and {MAX_TOP_LIMIT}")));
    }
    let window = p.window()?;
    let ratings = state.ratings.snapshot();
    blocking(move || Ok(cached(rank_frequency_for_window(&state.store, window, &ratings, class, Some(limit))?))).await
}

#[derive(Debug, Serialize)]
struct GraphBody {
    k: usize,
    k_max: usize,
    nodes: Vec<HashtagNode>,
    edges: Vec<HashtagEdge>,
}

async fn hashtag_graph(State(state): State<AppState>, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let p = Params::parse(q.as_deref(), &["k", "window", "mixed", "min_cooccurrence"])?;
    let k: usize = p.parsed_or("k", 0)?;
    let mixed: MixedPolicy = p.parsed_or("mixed", MixedPolicy::default())?;
    let min: u64 = p.parsed_or("min_cooccurrence", 1)?;
    let window = p.window()?;
    let ratings = state.ratings.snapshot();
    blocking(move || {
        if window.is_empty() {
            return Ok(cached(GraphBody { k, k_max: 0, nodes: Vec::new(), edges: Vec::new() }));
        }
        let full = hashtag_graph_for_window(&state.store, window, &ratings, min, mixed).map_err(|e| match e {
            newsky_core::analytics::hashtags::GraphError::Store(s) => ApiError::from(s),
            other => ApiError::BadRequest(other.to_string()),
        })?;
        let k_max = full.max_k_core().map_or(0, |(k, _)| k);
        let core = full.k_core(k);
        Ok(cached(GraphBody { k, k_max, nodes: core.nodes(), edges: core.edges() }))
    })
    .await
}

async fn audiences(State(state): State<AppState>, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let p = Params::parse(q.as_deref(), &["window", "top_words"])?;
    let window = p.window()?;
    let top: Option<usize> = p.parsed("top_words")?;
    blocking(move || {
        let mut report = stored_audiences(&state.store, &window)?
            .ok_or_else(|| ApiError::NotReady(format!("audience job has not run for window {window}")))?;
        if let Some(top) = top {
            for c in &mut report.communities {
                c.terms.truncate(top);
            }
        }
        Ok(cached(report))
    })
    .await
}

async fn orientation(State(state): State<AppState>, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let p = Params::parse(q.as_deref(), &["window", "lang"])?;
    let window = p.window()?;
    let lang = p.get("lang").map(str::to_ascii_lowercase);
    let ratings = state.ratings.snapshot();
    blocking(move || Ok(cached(orientation_for_window(&state.store, window, &ratings, lang.as_deref())?))).await
}

#[derive(Debug, Serialize)]
struct HealthBody {
    status: &'static str,
    #[serde(flatten)]
    store: StoreStatus,
    ratings_loaded: usize,
}

async fn health(State(state): State<AppState>, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    Params::parse(q.as_deref(), &[])?;
    let ratings_loaded = state.ratings.snapshot().len();
    // always 200 while the process is up; a store failure shows in the body
    let status = tokio::task::spawn_blocking(move || state.store.status()).await.expect("status task panicked");
    let body = match status {
        Ok(store) => HealthBody { status: "ok", store, ratings_loaded },
        Err(e) => {
            tracing::warn!(error = %e, "health check could not read the store");
            HealthBody { status: "degraded", store: StoreStatus::default(), ratings_loaded }
        }
    };
    Ok(Json(body).into_response())
}

async fn openapi(RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    Params::parse(q.as_deref(), &[])?;
    Ok(cached(openapi_document()))
}
