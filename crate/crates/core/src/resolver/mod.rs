//! Resolution of repost/like subjects to the original post.
//!
//! Lookups go cache first, then to the upstream in batches of at most
//! `batch_limit` URIs, under a token-bucket rate limit. Concurrent misses
//! for the same URI share one upstream request.

mod fetch;
pub mod mock;

pub use fetch::{parse_manifest, FetchError, FixturePostFetcher, HttpPostFetcher, PostFetcher, GET_POSTS_PATH};

use chrono::Utc;
use governor::{DefaultDirectRateLimiter, Quota, RateLimiter};
use lru::LruCache;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::num::{NonZeroU32, NonZeroUsize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use tokio::sync::watch;

use crate::bsky::PostView;
use crate::event::StrongRef;
use crate::parser::{parse_record, ParsedPost};
use crate::timefmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ResolutionOutcome {
    Resolved(Arc<ParsedPost>),
    NotFound,
    /// Upstream unavailable; retryable once the cache entry expires.
    Failed,
}

#[derive(Debug, Clone)]
pub struct ResolverConfig {
    pub batch_limit: usize,
    pub cache_capacity: usize,
    pub rate_per_sec: u32,
    pub max_retries: u32,
    pub retry_base: Duration,
    pub failed_ttl: Duration,
    pub not_found_ttl: Duration,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        Self {
            batch_limit: 25,
            cache_capacity: 500_000,
            rate_per_sec: 10,
            max_retries: 3,
            retry_base: Duration::from_millis(500),
            failed_ttl: Duration::from_secs(60),
            not_found_ttl: Duration::from_secs(24 * 3600),
        }
    }
}

#[derive(Debug, Clone)]
struct CacheEntry {
    outcome: ResolutionOutcome,
    fetched_at: Instant,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResolverStats {
    pub upstream_calls: u64,
    pub cache_hits: u64,
    pub resolved: u64,
    pub not_found: u64,
    /// URIs given up on after exhausting retries.
    pub dropped: u64,
}

#[derive(Debug, Default)]
struct Counters {
    upstream_calls: AtomicU64,
    cache_hits: AtomicU64,
    resolved: AtomicU64,
    not_found: AtomicU64,
    dropped: AtomicU64,
}

type Waiter = watch::Receiver<Option<ResolutionOutcome>>;

pub struct Resolver<F> {
    fetcher: F,
    config: ResolverConfig,
    cache: Mutex<LruCache<String, CacheEntry>>,
    inflight: Mutex<HashMap<String, Waiter>>,
    limiter: DefaultDirectRateLimiter,
    counters: Counters,
}

/// Convert an upstream post view into the pipeline's parsed form.
pub fn parse_post_view(view: &PostView) -> ParsedPost {
    let created_at = view
        .record
        .created_at
        .as_deref()
        .or(view.indexed_at.as_deref())
        .and_then(|t| timefmt::parse(t).ok())
        .unwrap_or_else(Utc::now);
    parse_record(&view.uri, &view.author.did, created_at, &view.record.to_record())
}

impl<F: PostFetcher> Resolver<F> {
    pub fn new(fetcher: F, config: ResolverConfig) -> Self {
        let capacity = NonZeroUsize::new(config.cache_capacity.max(1)).expect("non-zero");
        let rate = NonZeroU32::new(config.rate_per_sec.max(1)).expect("non-zero");
        Self {
            fetcher,
            cache: Mutex::new(LruCache::new(capacity)),
            inflight: Mutex::new(HashMap::new()),
            limiter: RateLimiter::direct(Quota::per_second(rate)),
            counters: Counters::default(),
            config,
        }
    }

    pub fn config(&self) -> &ResolverConfig {
        &self.config
    }

    pub fn fetcher(&self) -> &F {
        &self.fetcher
    }

    pub fn stats(&self) -> ResolverStats {
        let c = &self.counters;
        ResolverStats {
            upstream_calls: c.upstream_calls.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            resolved: c.resolved.load(Ordering::Relaxed),
            not_found: c.not_found.load(Ordering::Relaxed),
            dropped: c.dropped.load(Ordering::Relaxed),
        }
    }

    /// Seed the cache with a post already parsed from the stream.
    pub fn prime(&self, post: ParsedPost) {
        let mut cache = self.cache.lock().expect("cache lock");
        cache.put(
            post.post_uri.clone(),
            CacheEntry { outcome: ResolutionOutcome::Resolved(Arc::new(post)), fetched_at: Instant::now() },
        );
    }

    fn cached(&self, cache: &mut LruCache<String, CacheEntry>, uri: &str) -> Option<ResolutionOutcome> {
        let entry = cache.get(uri)?;
        let ttl = match entry.outcome {
            ResolutionOutcome::Resolved(_) => return Some(entry.outcome.clone()),
            ResolutionOutcome::NotFound => self.config.not_found_ttl,
            ResolutionOutcome::Failed => self.config.failed_ttl,
        };
        if entry.fetched_at.elapsed() < ttl {
            return Some(entry.outcome.clone());
        }
        cache.pop(uri);
        None
    }

    pub async fn resolve(&self, refs: &[StrongRef]) -> BTreeMap<String, ResolutionOutcome> {
        let mut out = BTreeMap::new();
        let mut owned: Vec<(String, watch::Sender<Option<ResolutionOutcome>>)> = Vec::new();
        let mut waiting: Vec<(String, Waiter)> = Vec::new();
        {
            let mut cache = self.cache.lock().expect("cache lock");
            let mut inflight = self.inflight.lock().expect("inflight lock");
            let mut seen = HashSet::new();
            for r in refs {
                if !seen.insert(r.uri.as_str()) {
                    continue;
                }
                if let Some(outcome) = self.cached(&mut cache, &r.uri) {
                    self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                    out.insert(r.uri.clone(), outcome);
                    continue;
                }
                if let Some(rx) = inflight.get(&r.uri) {
                    // a dropped sender means the owning call was cancelled
                    if rx.has_changed().is_ok() {
                        waiting.push((r.uri.clone(), rx.clone()));
                        continue;
                    }
                }
                let (tx, rx) = watch::channel(None);
                inflight.insert(r.uri.clone(), rx);
                owned.push((r.uri.clone(), tx));
            }
        }

        for chunk in owned.chunks(self.config.batch_limit.max(1)) {
            let uris: Vec<String> = chunk.iter().map(|(u, _)| u.clone()).collect();
            let fetched = self.fetch_with_retry(&uris).await;
            let mut cache = self.cache.lock().expect("cache lock");
            let mut inflight = self.inflight.lock().expect("inflight lock");
            for (uri, tx) in chunk {
                let outcome = match &fetched {
                    Ok(found) => match found.get(uri) {
                        Some(post) => {
                            self.counters.resolved.fetch_add(1, Ordering::Relaxed);
                            ResolutionOutcome::Resolved(post.clone())
                        }
                        None => {
                            self.counters.not_found.fetch_add(1, Ordering::Relaxed);
                            ResolutionOutcome::NotFound
                        }
                    },
                    Err(_) => ResolutionOutcome::Failed,
                };
                cache.put(uri.clone(), CacheEntry { outcome: outcome.clone(), fetched_at: Instant::now() });
                inflight.remove(uri);
                let _ = tx.send(Some(outcome.clone()));
                out.insert(uri.clone(), outcome);
            }
        }

        for (uri, mut rx) in waiting {
            let outcome = match rx.wait_for(Option::is_some).await {
                Ok(v) => v.clone().unwrap_or(ResolutionOutcome::Failed),
                Err(_) => ResolutionOutcome::Failed,
            };
            out.insert(uri, outcome);
        }
        out
    }

    async fn fetch_with_retry(&self, uris: &[String]) -> Result<HashMap<String, Arc<ParsedPost>>, FetchError> {
        let mut attempt = 0;
        loop {
            self.limiter.until_ready().await;
            self.counters.upstream_calls.fetch_add(1, Ordering::Relaxed);
            match self.fetcher.fetch(uris).await {
                Ok(views) => {
                    let wanted: HashSet<&str> = uris.iter().map(String::as_str).collect();
                    return Ok(views
                        .iter()
                        .filter(|v| wanted.contains(v.uri.as_str()))
                        .map(|v| (v.uri.clone(), Arc::new(parse_post_view(v))))
                        .collect());
                }
                Err(e) if attempt < self.config.max_retries => {
                    let delay = self.config.retry_base.saturating_mul(1 << attempt.min(16));
                    tracing::warn!(error = %e, attempt, "getPosts failed, retrying");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(e) => {
                    tracing::warn!(error = %e, uris = uris.len(), "getPosts failed, dropping batch");
                    self.counters.dropped.fetch_add(uris.len() as u64, Ordering::Relaxed);
                    return Err(e);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsky::{Author, FeedPost};

    pub(crate) fn view(uri: &str, text: &str) -> PostView {
        PostView {
            uri: uri.to_string(),
            cid: "bafy".into(),
            author: Author { did: StrongRef::new(uri, "c").unwrap().target_actor().to_string(), handle: None },
            record: FeedPost {
                text: text.to_string(),
                created_at: Some("2024-06-14T12:00:00Z".into()),
                ..Default::default()
            },
            indexed_at: None,
        }
    }

    fn sref(i: usize) -> StrongRef {
        StrongRef::new(format!("at://did:plc:a/app.bsky.feed.post/{i}"), "bafy").unwrap()
    }

    fn fast() -> ResolverConfig {
        ResolverConfig { rate_per_sec: 1000, retry_base: Duration::from_millis(1), ..Default::default() }
    }

    #[tokio::test]
    async fn cache_hits_make_no_calls() {
        let fixture = FixturePostFetcher::new((0..3).map(|i| view(&sref(i).uri, "x")));
        let resolver = Resolver::new(fixture, fast());
        let refs: Vec<_> = (0..3).map(sref).collect();
        resolver.resolve(&refs).await;
        assert_eq!(resolver.fetcher().calls(), 1);
        let again = resolver.resolve(&refs).await;
        assert_eq!(resolver.fetcher().calls(), 1);
        assert!(again.values().all(|o| matches!(o, ResolutionOutcome::Resolved(_))));
        assert_eq!(resolver.stats().cache_hits, 3);
    }

    #[tokio::test]
    async fn unknown_uri_is_not_found() {
        let resolver = Resolver::new(FixturePostFetcher::default(), fast());
        let out = resolver.resolve(&[sref(9)]).await;
        assert_eq!(out[&sref(9).uri], ResolutionOutcome::NotFound);
    }

    #[tokio::test]
    async fn batches_split_at_limit() {
        let fixture = FixturePostFetcher::new((0..30).map(|i| view(&sref(i).uri, "x")));
        let resolver = Resolver::new(fixture, fast());
        let refs: Vec<_> = (0..30).map(sref).collect();
        let out = resolver.resolve(&refs).await;
        assert_eq!(out.len(), 30);
        assert_eq!(resolver.fetcher().calls(), 30usize.div_ceil(25));
    }

    #[tokio::test]
    async fn primed_posts_skip_upstream() {
        let resolver = Resolver::new(FixturePostFetcher::default(), fast());
        let post = parse_post_view(&view(&sref(1).uri, "primed"));
        resolver.prime(post);
        let out = resolver.resolve(&[sref(1)]).await;
        assert!(matches!(&out[&sref(1).uri], ResolutionOutcome::Resolved(p) if p.text == "primed"));
        assert_eq!(resolver.fetcher().calls(), 0);
    }

    #[tokio::test]
    async fn expired_not_found_is_refetched() {
        let config = ResolverConfig { not_found_ttl: Duration::ZERO, ..fast() };
        let resolver = Resolver::new(FixturePostFetcher::default(), config);
        resolver.resolve(&[sref(1)]).await;
        resolver.resolve(&[sref(1)]).await;
        assert_eq!(resolver.fetcher().calls(), 2);
    }
}
