use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use newsky_api::{router, AppState, CACHE_CONTROL};
use newsky_core::analytics::{run_audiences_job, AudienceConfig};
use newsky_core::event::EventKind;
use newsky_core::fixture::{single_link_posts, TOP_RELIABLE};
use newsky_core::ingest::{connect, IngestConfig, StreamSource};
use newsky_core::pipeline::{Pipeline, PipelineConfig};
use newsky_core::ratings::{RatingTable, RatingsHandle, Reliability, SourceRating};
use newsky_core::resolver::{FixturePostFetcher, Resolver, ResolverConfig};
use newsky_core::store::{NewsLinkObservation, Store};
use newsky_core::timefmt::{self, Window};
use serde_json::Value;
use std::sync::Arc;
use tower::ServiceExt;

const DAY: &str = "from=2024-07-01T00:00:00Z&to=2024-07-02T00:00:00Z";

fn ratings() -> RatingTable {
    let mut entries: Vec<(String, f64)> = vec![("unreliable.example".into(), 20.0)];
    entries.extend(TOP_RELIABLE.iter().map(|d| (d.to_string(), 90.0)));
    RatingTable::from_ratings(entries.into_iter().map(|(d, s)| SourceRating {
        score: Some(s),
        reliability: Reliability::from_score(Some(s)),
        ..SourceRating::unrated(&d)
    }))
}

/// One day of posts: 98 reliable links spread over the most shared reliable domains
/// with strictly decreasing counts, and 2 unreliable ones.
async fn fixture_app() -> (tempfile::TempDir, Arc<Store>, Router) {
    let counts = [20, 17, 14, 12, 10, 8, 7, 5, 3, 2];
    let mut per_day: Vec<(&str, usize)> = TOP_RELIABLE.iter().copied().zip(counts).collect();
    per_day.push(("unreliable.example", 2));
    let start = timefmt::parse("2024-07-01T00:00:00Z").unwrap();
    let lines = single_link_posts(start, 1, &per_day);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("day.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let store = Arc::new(Store::open(dir.path().join("api.db")).unwrap());
    let resolver = Arc::new(Resolver::new(FixturePostFetcher::default(), ResolverConfig::default()));
    let handle = connect(StreamSource::ReplayFile { path, resume_cursor: None }, IngestConfig::default());
    Pipeline::new(store.clone(), resolver, PipelineConfig::default())
        .run(handle, std::future::pending())
        .await
        .unwrap();

    let state = AppState::new(store.clone(), Arc::new(RatingsHandle::new(ratings())), 1_000);
    (dir, store, router(state, None))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Option<String>, String) {
    let response = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = response.status();
    let cache = response.headers().get(header::CACHE_CONTROL).map(|v| v.to_str().unwrap().to_string());
    let body = response.into_body().collect().await.unwrap().to_bytes();
    (status, cache, String::from_utf8(body.to_vec()).unwrap())
}

async fn get_json(app: &Router, uri: &str) -> Value {
    let (status, _, body) = get(app, uri).await;
    assert_eq!(status, StatusCode::OK, "{uri}: {body}");
    serde_json::from_str(&body).unwrap()
}

#[tokio::test]
async fn prevalence_relative_and_absolute() {
    let (_dir, _store, app) = fixture_app().await;
    let rel = get_json(&app, &format!("/v1/prevalence?mode=relative&granularity=day&{DAY}")).await;
    assert_eq!(rel, serde_json::json!([{ "bucket_start": "2024-07-01T00:00:00Z", "ratio": 0.02 }]));

    let (status, cache, body) = get(&app, &format!("/v1/prevalence?granularity=hour&{DAY}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cache.as_deref(), Some(CACHE_CONTROL));
    let buckets: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(buckets.len(), 24);
    let total: u64 = buckets.iter().map(|b| b["total_links"].as_u64().unwrap()).sum();
    assert_eq!(total, 100);
    // no writes in between: same bytes
    assert_eq!(get(&app, &format!("/v1/prevalence?granularity=hour&{DAY}")).await.2, body);

    let empty = get_json(&app, "/v1/prevalence?from=2024-07-01T00:00:00Z&to=2024-07-01T00:00:00Z").await;
    assert_eq!(empty, serde_json::json!([]));
}

#[tokio::test]
async fn strict_parameters() {
    let (_dir, _store, app) = fixture_app().await;
    for uri in [
        format!("/v1/prevalence?{DAY}&colour=red"),
        format!("/v1/prevalence?{DAY}&mode=relative&mode=absolute"),
        "/v1/prevalence?from=2024-07-01T00:00:00Z".to_string(),
        format!("/v1/prevalence?{DAY}&granularity=week"),
        "/v1/prevalence?from=2024-07-02T00:00:00Z&to=2024-07-01T00:00:00Z".to_string(),
        "/v1/domains/top?limit=0".to_string(),
        "/v1/domains/top?limit=1001".to_string(),
        "/v1/hashtag-graph?k=-1".to_string(),
        "/v1/orientation?window=yesterday".to_string(),
        "/v1/health?verbose=1".to_string(),
    ] {
        let (status, _, body) = get(&app, &uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(serde_json::from_str::<Value>(&body).unwrap()["error"].is_string());
    }
    let (status, _, _) = get(&app, "/v1/prevalence?from=2020-01-01T00:00:00Z&to=2024-01-01T00:00:00Z").await;
    assert_eq!(status, StatusCode::RANGE_NOT_SATISFIABLE);
}

#[tokio::test]
async fn top_domains_follow_share_counts() {
    let (_dir, _store, app) = fixture_app().await;
    let rows = get_json(&app, "/v1/domains/top?class=reliable&limit=10").await;
    let domains: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["domain"].as_str().unwrap()).collect();
    assert_eq!(domains, TOP_RELIABLE);
    assert_eq!(rows[0]["rank"], 1);
    let one = get_json(&app, "/v1/domains/top?class=unreliable&limit=1").await;
    assert_eq!(one, serde_json::json!([{ "rank": 1, "domain": "unreliable.example", "frequency": 2 }]));
}

fn tagged(cursor: u64, domain: &str, tags: &[&str]) -> NewsLinkObservation {
    NewsLinkObservation {
        event_cursor: cursor,
        event_kind: EventKind::Post,
        actor_id: "did:plc:t".into(),
        observed_at: timefmt::parse("2024-07-03T00:00:00Z").unwrap(),
        raw_url: format!("https://{domain}/"),
        domain: domain.into(),
        post_uri: format!("at://did:plc:t/app.bsky.feed.post/{cursor}"),
        hashtags: tags.iter().map(|t| t.to_string()).collect(),
    }
}

#[tokio::test]
async fn hashtag_graph_cores() {
    let (_dir, store, app) = fixture_app().await;
    store.record(&tagged(1000, "unreliable.example", &["a", "b", "c"])).unwrap();
    store.record(&tagged(1001, "nytimes.com", &["a", "b", "d"])).unwrap();
    let full = get_json(&app, "/v1/hashtag-graph?k=0").await;
    assert_eq!(full["k_max"], 2);
    assert_eq!(full["nodes"].as_array().unwrap().len(), 4);
    assert_eq!(full["edges"].as_array().unwrap().len(), 5);
    let ab = &full["edges"][0];
    assert_eq!(
        (ab["source"].as_str(), ab["target"].as_str(), ab["weight"].as_f64()),
        (Some("a"), Some("b"), Some(0.0))
    );
    let core = get_json(&app, "/v1/hashtag-graph?k=2").await;
    assert_eq!(core["nodes"].as_array().unwrap().len(), 4);
    let beyond = get_json(&app, "/v1/hashtag-graph?k=3").await;
    assert!(beyond["nodes"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn audiences_need_the_job() {
    let (_dir, store, app) = fixture_app().await;
    let (status, _, _) = get(&app, "/v1/audiences").await;
    assert_eq!(status, StatusCode::CONFLICT);
    run_audiences_job(&store, Window::All, &AudienceConfig::default()).unwrap();
    let report = get_json(&app, "/v1/audiences?top_words=5").await;
    assert_eq!(report["window"], "all");
    assert!(report["communities"].is_array());
}

#[tokio::test]
async fn orientation_health_and_docs() {
    let (_dir, _store, app) = fixture_app().await;
    let table = get_json(&app, "/v1/orientation").await;
    assert_eq!(table["rows"], serde_json::json!([]));
    assert_eq!(table["unknown"]["reliable"], 98);
    let empty = get_json(&app, "/v1/orientation?window=2024-07-01T00:00:00Z/2024-07-01T00:00:00Z").await;
    assert_eq!(empty["unknown"]["unreliable"], 0);

    let (status, cache, body) = get(&app, "/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cache, None);
    let health: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["last_cursor"], 100);
    assert_eq!(health["decode_errors"], 0);

    let doc = get_json(&app, "/v1/openapi.json").await;
    assert!(doc["paths"]["/v1/prevalence"]["get"].is_object());
}

#[tokio::test]
async fn fresh_store_health_and_static_files() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path().join("fresh.db")).unwrap());
    let site = dir.path().join("site");
    std::fs::create_dir(&site).unwrap();
    std::fs::write(site.join("index.html"), "<h1>dash</h1>").unwrap();
    let state = AppState::new(store, Arc::new(RatingsHandle::new(RatingTable::empty())), 100);
    let app = router(state, Some(site));
    let health = get_json(&app, "/v1/health").await;
    assert_eq!(health["last_cursor"], Value::Null);
    assert_eq!(health["cursor_lag_seconds"], Value::Null);
    let (status, _, body) = get(&app, "/index.html").await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "<h1>dash</h1>"));
}
