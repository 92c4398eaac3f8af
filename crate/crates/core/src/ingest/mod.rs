//! Stream ingestion.
//!
//! A single reader task owns the transport, decodes frames and hands
//! events to consumers over a bounded channel. When the channel is full
//! the reader stops polling the transport instead of dropping events.
//! After a disconnect it reopens the transport from the last delivered
//! cursor and suppresses anything at or below it, so each cursor is
//! delivered at most once and in ascending order.

pub mod car;
pub mod decode;
mod live;
mod replay;

pub use decode::{decode_frame, encode_replay_line, DecodeError, Decoded, RawFrame};
pub use live::LiveTransport;
pub use replay::ReplayTransport;

use rand::Rng;
use serde::Serialize;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::event::FirehoseEvent;

pub const DEFAULT_QUEUE_CAPACITY: usize = 10_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("connect failed: {0}")]
    ConnectFailed(String),
    #[error("gave up after {0} failed connection attempts")]
    RetriesExhausted(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamSource {
    LiveWebsocket { endpoint: String, resume_cursor: Option<u64> },
    ReplayFile { path: PathBuf, resume_cursor: Option<u64> },
}

impl StreamSource {
    pub fn resume_cursor(&self) -> Option<u64> {
        match self {
            StreamSource::LiveWebsocket { resume_cursor, .. } | StreamSource::ReplayFile { resume_cursor, .. } => {
                *resume_cursor
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BackoffConfig {
    pub base: Duration,
    pub cap: Duration,
    pub jitter: bool,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self { base: Duration::from_secs(1), cap: Duration::from_secs(60), jitter: true }
    }
}

/// Exponential backoff with "equal jitter": half the step is fixed, the
/// other half random.
#[derive(Debug)]
pub struct Backoff {
    config: BackoffConfig,
    attempt: u32,
}

impl Backoff {
    pub fn new(config: BackoffConfig) -> Self {
        Self { config, attempt: 0 }
    }

    pub fn reset(&mut self) {
        self.attempt = 0;
    }

    pub fn next_delay(&mut self) -> Duration {
        let factor = 2u32.saturating_pow(self.attempt.min(31));
        self.attempt = self.attempt.saturating_add(1);
        let step = self.config.base.saturating_mul(factor).min(self.config.cap);
        if !self.config.jitter || step.is_zero() {
            return step;
        }
        let half = step / 2;
        half + rand::thread_rng().gen_range(Duration::ZERO..=half)
    }
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub queue_capacity: usize,
    pub backoff: BackoffConfig,
    /// Consecutive failed connection attempts tolerated; `None` retries forever.
    pub max_connect_attempts: Option<u32>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { queue_capacity: DEFAULT_QUEUE_CAPACITY, backoff: BackoffConfig::default(), max_connect_attempts: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    /// Stable position within a finite source (replay line number). Lets
    /// the reader ignore frames it has already seen after a reconnect,
    /// including ones that failed to decode.
    pub position: Option<u64>,
    pub raw: RawFrame,
}

#[derive(Debug)]
pub enum StreamItem {
    Frame(Frame),
    Disconnected(String),
    End,
}

pub trait FrameStream: Send {
    fn next_frame(&mut self) -> impl Future<Output = StreamItem> + Send;
}

pub trait Transport: Send + 'static {
    type Stream: FrameStream;

    fn open(&mut self, resume: Option<u64>) -> impl Future<Output = Result<Self::Stream, IngestError>> + Send;

    /// Whether a failed `open` should be retried with backoff.
    fn retry_connect(&self) -> bool;
}

/// Counters shared between the reader task and observers.
#[derive(Debug, Default)]
pub struct IngestMetrics {
    delivered: AtomicU64,
    decode_errors: AtomicU64,
    skipped: AtomicU64,
    cursor_gaps: AtomicU64,
    server_errors: AtomicU64,
    reconnects: AtomicU64,
    duplicates: AtomicU64,
    // cursor + 1, zero meaning nothing delivered yet
    last_cursor: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub delivered: u64,
    pub decode_errors: u64,
    pub skipped: u64,
    pub cursor_gaps: u64,
    pub server_errors: u64,
    pub reconnects: u64,
    pub duplicates_suppressed: u64,
    pub last_cursor: Option<u64>,
}

impl IngestMetrics {
    pub fn stats(&self) -> IngestStats {
        let last = self.last_cursor.load(Ordering::Acquire);
        IngestStats {
            delivered: self.delivered.load(Ordering::Relaxed),
            decode_errors: self.decode_errors.load(Ordering::Relaxed),
            skipped: self.skipped.load(Ordering::Relaxed),
            cursor_gaps: self.cursor_gaps.load(Ordering::Relaxed),
            server_errors: self.server_errors.load(Ordering::Relaxed),
            reconnects: self.reconnects.load(Ordering::Relaxed),
            duplicates_suppressed: self.duplicates.load(Ordering::Relaxed),
            last_cursor: last.checked_sub(1),
        }
    }

    pub fn decode_errors(&self) -> u64 {
        self.decode_errors.load(Ordering::Relaxed)
    }
}

pub struct IngestHandle {
    pub events: mpsc::Receiver<FirehoseEvent>,
    pub metrics: Arc<IngestMetrics>,
    task: JoinHandle<Result<(), IngestError>>,
}

impl IngestHandle {
    pub async fn recv(&mut self) -> Option<FirehoseEvent> {
        self.events.recv().await
    }

    /// Wait for the reader to stop. Call after the channel is drained or
    /// dropped.
    pub async fn finish(self) -> Result<(), IngestError> {
        drop(self.events);
        match self.task.await {
            Ok(result) => result,
            Err(e) if e.is_cancelled() => Ok(()),
            Err(e) => std::panic::resume_unwind(e.into_panic()),
        }
    }

    pub fn abort(&self) {
        self.task.abort();
    }

    /// Drain every event. Handy for finite sources.
    pub async fn collect(mut self) -> Result<(Vec<FirehoseEvent>, IngestStats), IngestError> {
        let mut out = Vec::new();
        while let Some(e) = self.events.recv().await {
            out.push(e);
        }
        let metrics = self.metrics.clone();
        self.finish().await?;
        Ok((out, metrics.stats()))
    }
}

pub fn connect(source: StreamSource, config: IngestConfig) -> IngestHandle {
    match source {
        StreamSource::LiveWebsocket { endpoint, resume_cursor } => {
            connect_with(LiveTransport::new(endpoint), resume_cursor, config)
        }
        StreamSource::ReplayFile { path, resume_cursor } => {
            connect_with(ReplayTransport::new(path), resume_cursor, config)
        }
    }
}

pub fn connect_with<T: Transport>(transport: T, resume: Option<u64>, config: IngestConfig) -> IngestHandle {
    let (tx, rx) = mpsc::channel(config.queue_capacity.max(1));
    let metrics = Arc::new(IngestMetrics::default());
    let task = tokio::spawn(run_reader(transport, resume, config, tx, metrics.clone()));
    IngestHandle { events: rx, metrics, task }
}

async fn run_reader<T: Transport>(
    mut transport: T,
    resume: Option<u64>,
    config: IngestConfig,
    tx: mpsc::Sender<FirehoseEvent>,
    metrics: Arc<IngestMetrics>,
) -> Result<(), IngestError> {
    let mut last_cursor = resume;
    let mut last_position: Option<u64> = None;
    let mut backoff = Backoff::new(config.backoff);
    let mut failed_attempts = 0u32;

    loop {
        let mut stream = match transport.open(last_cursor).await {
            Ok(stream) => {
                failed_attempts = 0;
                stream
            }
            Err(e) => {
                if !transport.retry_connect() {
                    return Err(e);
                }
                failed_attempts += 1;
                if config.max_connect_attempts.is_some_and(|max| failed_attempts >= max) {
                    return Err(IngestError::RetriesExhausted(failed_attempts));
                }
                let delay = backoff.next_delay();
                tracing::warn!(error = %e, delay_ms = delay.as_millis() as u64, "connect failed, backing off");
                tokio::time::sleep(delay).await;
                continue;
            }
        };

        loop {
            match stream.next_frame().await {
                StreamItem::Frame(frame) => {
                    if let Some(pos) = frame.position {
                        if last_position.is_some_and(|seen| pos <= seen) {
                            continue;
                        }
                        last_position = Some(pos);
                    }
                    match decode_frame(&frame.raw) {
                        Ok(Decoded::Event(event)) => {
                            if last_cursor.is_some_and(|c| event.cursor <= c) {
                                metrics.duplicates.fetch_add(1, Ordering::Relaxed);
                                continue;
                            }
                            let cursor = event.cursor;
                            if tx.send(event).await.is_err() {
                                // consumer went away
                                return Ok(());
                            }
                            backoff.reset();
                            last_cursor = Some(cursor);
                            metrics.delivered.fetch_add(1, Ordering::Relaxed);
                            metrics.last_cursor.store(cursor + 1, Ordering::Release);
                        }
                        Ok(Decoded::Skip { .. }) => {
                            metrics.skipped.fetch_add(1, Ordering::Relaxed);
                        }
                        Ok(Decoded::CursorGap { message }) => {
                            tracing::warn!(%message, "relay reported history loss, continuing from its head");
                            metrics.cursor_gaps.fetch_add(1, Ordering::Relaxed);
                        }
                        Ok(Decoded::ServerError { error, message }) => {
                            tracing::warn!(%error, ?message, "relay error frame");
                            metrics.server_errors.fetch_add(1, Ordering::Relaxed);
                        }
                        Err(e) => {
                            tracing::warn!(position = ?frame.position, "skipping undecodable frame: {e}");
                            metrics.decode_errors.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                }
                StreamItem::Disconnected(reason) => {
                    metrics.reconnects.fetch_add(1, Ordering::Relaxed);
                    let delay = backoff.next_delay();
                    tracing::warn!(%reason, ?last_cursor, delay_ms = delay.as_millis() as u64, "stream dropped, reconnecting");
                    tokio::time::sleep(delay).await;
                    break;
                }
                StreamItem::End => return Ok(()),
            }
        }
    }
}
