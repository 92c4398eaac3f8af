//! Local stand-in for the `app.bsky.feed.getPosts` endpoint, served over
//! real HTTP so the client path is exercised end to end.

use axum::extract::{RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::task::JoinHandle;

use super::fetch::{FixturePostFetcher, GET_POSTS_PATH};
use crate::bsky::GetPostsResponse;

#[derive(Debug, Default)]
struct MockState {
    fixture: FixturePostFetcher,
    calls: AtomicUsize,
    failing: AtomicBool,
    delay_ms: AtomicU64,
    requests: Mutex<Vec<Vec<String>>>,
}

pub struct MockPostsServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    task: JoinHandle<()>,
}

impl MockPostsServer {
    pub async fn start(fixture: FixturePostFetcher) -> std::io::Result<Self> {
        let state = Arc::new(MockState { fixture, ..Default::default() });
        let app = Router::new().route(GET_POSTS_PATH, get(get_posts)).with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(Self { addr, state, task })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Number of getPosts requests served so far.
    pub fn calls(&self) -> usize {
        self.state.calls.load(Ordering::SeqCst)
    }

    /// URI lists of every request, in arrival order.
    pub fn requests(&self) -> Vec<Vec<String>> {
        self.state.requests.lock().expect("requests lock").clone()
    }

    /// Answer every request with 503 while set.
    pub fn set_failing(&self, failing: bool) {
        self.state.failing.store(failing, Ordering::SeqCst);
    }

    pub fn set_delay(&self, delay: Duration) {
        self.state.delay_ms.store(delay.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Drop for MockPostsServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn get_posts(State(state): State<Arc<MockState>>, RawQuery(query): RawQuery) -> Response {
    state.calls.fetch_add(1, Ordering::SeqCst);
    let uris: Vec<String> = url::form_urlencoded::parse(query.unwrap_or_default().as_bytes())
        .filter(|(k, _)| k == "uris")
        .map(|(_, v)| v.into_owned())
        .collect();
    state.requests.lock().expect("requests lock").push(uris.clone());
    let delay = state.delay_ms.load(Ordering::SeqCst);
    if delay > 0 {
        tokio::time::sleep(Duration::from_millis(delay)).await;
    }
    if state.failing.load(Ordering::SeqCst) {
        return (StatusCode::SERVICE_UNAVAILABLE, "unavailable").into_response();
    }
    if uris.len() > 25 {
        return (StatusCode::BAD_REQUEST, "too many uris").into_response();
    }
    Json(GetPostsResponse { posts: state.fixture.lookup(&uris) }).into_response()
}
