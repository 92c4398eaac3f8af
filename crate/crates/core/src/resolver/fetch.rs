use std::collections::HashMap;
use std::future::Future;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use thiserror::Error;

use crate::bsky::{GetPostsResponse, PostView};

pub const GET_POSTS_PATH: &str = "/xrpc/app.bsky.feed.getPosts";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("endpoint down: {0}")]
    EndpointDown(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Upstream source of original post records. One call per batch; URIs the
/// upstream does not know are simply absent from the result.
pub trait PostFetcher: Send + Sync + 'static {
    fn fetch(&self, uris: &[String]) -> impl Future<Output = Result<Vec<PostView>, FetchError>> + Send;
}

/// `GET {base}/xrpc/app.bsky.feed.getPosts?uris=..&uris=..`
#[derive(Debug, Clone)]
pub struct HttpPostFetcher {
    client: reqwest::Client,
    base_url: String,
}

impl HttpPostFetcher {
    pub fn new(base_url: impl Into<String>) -> Self {
        let client =
            reqwest::Client::builder().timeout(std::time::Duration::from_secs(20)).build().expect("http client");
        Self { client, base_url: base_url.into().trim_end_matches('/').to_string() }
    }

    pub fn request_url(&self) -> String {
        format!("{}{GET_POSTS_PATH}", self.base_url)
    }
}

impl PostFetcher for HttpPostFetcher {
    async fn fetch(&self, uris: &[String]) -> Result<Vec<PostView>, FetchError> {
        let query: Vec<(&str, &str)> = uris.iter().map(|u| ("uris", u.as_str())).collect();
        let response = self
            .client
            .get(self.request_url())
            .query(&query)
            .send()
            .await
            .map_err(|e| FetchError::EndpointDown(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(FetchError::EndpointDown(format!("HTTP {status}")));
        }
        let body: GetPostsResponse = response.json().await.map_err(|e| FetchError::Malformed(e.to_string()))?;
        Ok(body.posts)
    }
}

/// In-process fetcher keyed by a fixture manifest (a JSON array of post
/// views, or a `{"posts": [...]}` object). Counts calls.
#[derive(Debug, Clone, Default)]
pub struct FixturePostFetcher {
    posts: Arc<HashMap<String, PostView>>,
    calls: Arc<AtomicUsize>,
}

impl FixturePostFetcher {
    pub fn new(posts: impl IntoIterator<Item = PostView>) -> Self {
        Self { posts: Arc::new(posts.into_iter().map(|p| (p.uri.clone(), p)).collect()), calls: Arc::default() }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let posts = parse_manifest(&raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::new(posts))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub(crate) fn lookup(&self, uris: &[String]) -> Vec<PostView> {
        uris.iter().filter_map(|u| self.posts.get(u).cloned()).collect()
    }
}

pub fn parse_manifest(raw: &str) -> Result<Vec<PostView>, serde_json::Error> {
    match serde_json::from_str::<Vec<PostView>>(raw) {
        Ok(posts) => Ok(posts),
        Err(_) => serde_json::from_str::<GetPostsResponse>(raw).map(|r| r.posts),
    }
}

impl PostFetcher for FixturePostFetcher {
    async fn fetch(&self, uris: &[String]) -> Result<Vec<PostView>, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.lookup(uris))
    }
}
