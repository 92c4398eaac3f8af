//! Stream → parse → resolve → store.
//!
//! Events are taken off the ingest queue in chunks. Posts in a chunk seed
//! the resolver cache before the chunk's reposts and likes are resolved,
//! and each chunk is committed in one transaction together with its last
//! cursor, so a restart resumes exactly after the last committed event.

use serde::Serialize;
use std::future::Future;
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;
use tokio::time::Instant;

use crate::event::{EventKind, FirehoseEvent};
use crate::ingest::{IngestError, IngestHandle, IngestStats};
use crate::parser::{parse_post, ParsedPost};
use crate::resolver::{PostFetcher, ResolutionOutcome, Resolver, ResolverStats};
use crate::store::{Engagement, IngestBatch, NewsLinkObservation, Store, StoreError, TimelineEntry};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub chunk_size: usize,
    /// Commit a partial chunk after this long.
    pub flush_interval: Duration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { chunk_size: 500, flush_interval: Duration::from_secs(1) }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineSummary {
    pub events: u64,
    pub observations: u64,
    pub engagements: u64,
    pub unresolved_refs: u64,
    /// Last committed cursor; pass it back as the resume cursor.
    pub last_cursor: Option<u64>,
    pub interrupted: bool,
    pub ingest: IngestStats,
    pub resolver: ResolverStats,
}

/// Rows derived from one chunk of events.
pub async fn build_batch<F: PostFetcher>(events: &[FirehoseEvent], resolver: &Resolver<F>) -> (IngestBatch, u64) {
    let mut batch = IngestBatch::default();
    let mut parsed: Vec<Option<ParsedPost>> = Vec::with_capacity(events.len());
    for event in events {
        let post = parse_post(event);
        if let Some(p) = &post {
            resolver.prime(p.clone());
            if p.has_links() {
                batch.resolved.push(p.clone());
            }
        }
        parsed.push(post);
    }

    let refs: Vec<_> = events.iter().filter_map(|e| e.subject.clone()).collect();
    let outcomes = if refs.is_empty() { Default::default() } else { resolver.resolve(&refs).await };
    let mut unresolved = 0;

    for (event, post) in events.iter().zip(parsed) {
        match event.kind {
            EventKind::Post => {
                let Some(post) = post else { continue };
                push_observations(&mut batch, event, &post);
                batch.timeline.push(TimelineEntry {
                    event_cursor: event.cursor,
                    kind: EventKind::Post,
                    actor: event.actor.clone(),
                    observed_at: event.created_at,
                    text: post.text,
                    lang: post.lang,
                });
            }
            EventKind::Repost | EventKind::Like => {
                let Some(subject) = &event.subject else { continue };
                let original = match outcomes.get(&subject.uri) {
                    Some(ResolutionOutcome::Resolved(p)) => Some(p.clone()),
                    _ => {
                        unresolved += 1;
                        None
                    }
                };
                batch.engagements.push(Engagement {
                    event_cursor: event.cursor,
                    kind: event.kind,
                    actor: event.actor.clone(),
                    author: subject.target_actor().to_string(),
                    post_uri: subject.uri.clone(),
                    observed_at: event.created_at,
                    news_linking: original.as_ref().is_some_and(|p| p.has_links()),
                });
                if let Some(p) = original {
                    push_observations(&mut batch, event, &p);
                    if event.kind == EventKind::Repost {
                        batch.timeline.push(TimelineEntry {
                            event_cursor: event.cursor,
                            kind: EventKind::Repost,
                            actor: event.actor.clone(),
                            observed_at: event.created_at,
                            text: p.text.clone(),
                            lang: p.lang.clone(),
                        });
                    }
                }
            }
            EventKind::Other => {}
        }
    }
    batch.last_cursor = events.last().map(|e| e.cursor);
    batch.last_event_at = events.iter().map(|e| e.created_at).max();
    (batch, unresolved)
}

/// Observations take the event's own timestamp: a like counts when it
/// happens, not when the liked post was written.
fn push_observations(batch: &mut IngestBatch, event: &FirehoseEvent, post: &ParsedPost) {
    for link in &post.urls {
        batch.observations.push(NewsLinkObservation {
            event_cursor: event.cursor,
            event_kind: event.kind,
            actor_id: event.actor.clone(),
            observed_at: event.created_at,
            raw_url: link.raw_url.clone(),
            domain: link.domain.clone(),
            post_uri: post.post_uri.clone(),
            hashtags: post.hashtags.clone(),
        });
    }
}

pub struct Pipeline<F> {
    pub store: Arc<Store>,
    pub resolver: Arc<Resolver<F>>,
    pub config: PipelineConfig,
}

impl<F: PostFetcher> Pipeline<F> {
    pub fn new(store: Arc<Store>, resolver: Arc<Resolver<F>>, config: PipelineConfig) -> Self {
        Self { store, resolver, config }
    }

    /// Drain `handle` until the source ends or `shutdown` resolves. Events
    /// already read are committed before returning either way.
    pub async fn run(
        &self,
        mut handle: IngestHandle,
        shutdown: impl Future<Output = ()>,
    ) -> Result<PipelineSummary, PipelineError> {
        tokio::pin!(shutdown);
        self.warm_cache().await?;
        let mut summary = PipelineSummary::default();
        let mut reported_errors = 0u64;
        let mut chunk: Vec<FirehoseEvent> = Vec::with_capacity(self.config.chunk_size);
        let mut deadline: Option<Instant> = None;
        let mut ended = false;

        loop {
            let flush_due = tokio::select! {
                biased;
                _ = &mut shutdown => {
                    summary.interrupted = true;
                    true
                }
                next = handle.recv() => match next {
                    Some(event) => {
                        chunk.push(event);
                        deadline.get_or_insert_with(|| Instant::now() + self.config.flush_interval);
                        chunk.len() >= self.config.chunk_size
                    }
                    None => {
                        ended = true;
                        true
                    }
                },
                _ = sleep_until(deadline) => true,
            };
            if flush_due {
                let errors = handle.metrics.decode_errors();
                self.commit(&mut chunk, errors - reported_errors, &mut summary).await?;
                reported_errors = errors;
                deadline = None;
            }
            if ended || summary.interrupted {
                break;
            }
        }

        summary.ingest = handle.metrics.stats();
        summary.resolver = self.resolver.stats();
        summary.last_cursor = self.store_cursor().await?;
        if summary.interrupted {
            handle.abort();
            let _ = handle.finish().await;
        } else {
            handle.finish().await?;
        }
        Ok(summary)
    }

    /// Seed the resolver with posts stored by earlier runs, so likes of
    /// posts seen before a restart still resolve.
    pub async fn warm_cache(&self) -> Result<usize, PipelineError> {
        let store = self.store.clone();
        let limit = self.resolver.config().cache_capacity;
        let posts =
            tokio::task::spawn_blocking(move || store.resolved_posts(limit)).await.expect("store task panicked")?;
        let n = posts.len();
        for post in posts {
            self.resolver.prime(post);
        }
        Ok(n)
    }

    async fn commit(
        &self,
        chunk: &mut Vec<FirehoseEvent>,
        decode_errors: u64,
        summary: &mut PipelineSummary,
    ) -> Result<(), PipelineError> {
        if chunk.is_empty() && decode_errors == 0 {
            return Ok(());
        }
        let (mut batch, unresolved) = build_batch(chunk, &self.resolver).await;
        batch.decode_errors = decode_errors;
        summary.events += chunk.len() as u64;
        summary.observations += batch.observations.len() as u64;
        summary.engagements += batch.engagements.len() as u64;
        summary.unresolved_refs += unresolved;
        chunk.clear();
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || store.commit_batch(&batch)).await.expect("commit task panicked")?;
        Ok(())
    }

    async fn store_cursor(&self) -> Result<Option<u64>, StoreError> {
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || store.last_cursor()).await.expect("store task panicked")
    }
}

async fn sleep_until(deadline: Option<Instant>) {
    match deadline {
        Some(d) => tokio::time::sleep_until(d).await,
        None => std::future::pending().await,
    }
}
