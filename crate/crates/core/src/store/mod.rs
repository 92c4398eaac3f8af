//! Embedded storage (SQLite, WAL mode).
//!
//! Raw observations are kept append-only for analytics. Link counts are
//! also maintained per (hour, domain, kind) so the prevalence series can
//! be rebuilt cheaply; classification happens at query time against the
//! current ratings snapshot, so a ratings update reclassifies history.
//!
//! One process writes (enforced by a lock file next to the database);
//! any number of readers get snapshot-consistent views.

mod prevalence;

pub use prevalence::{
    write_prevalence_csv, Dedup, Granularity, KindSet, PrevalenceBucket, RelativePoint, PREVALENCE_CSV_HEADER,
};

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, ErrorCode, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

use crate::event::EventKind;
use crate::parser::ParsedPost;
use crate::timefmt::{self, Window};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage full")]
    StorageFull,
    #[error("store at {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("store opened read-only")]
    ReadOnly,
    #[error("range spans {requested} buckets, limit is {limit}")]
    RangeTooLarge { requested: u64, limit: u64 },
    #[error("sqlite: {0}")]
    Sqlite(rusqlite::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt row: {0}")]
    Corrupt(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        match e.sqlite_error_code() {
            Some(ErrorCode::DiskFull) => StoreError::StorageFull,
            _ => StoreError::Sqlite(e),
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// A resolved news link seen in a post, repost or like.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsLinkObservation {
    pub event_cursor: u64,
    pub event_kind: EventKind,
    pub actor_id: String,
    #[serde(with = "timefmt")]
    pub observed_at: DateTime<Utc>,
    pub raw_url: String,
    pub domain: String,
    pub post_uri: String,
    pub hashtags: Vec<String>,
}

/// A like or repost of another account's post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    pub event_cursor: u64,
    pub kind: EventKind,
    pub actor: String,
    pub author: String,
    pub post_uri: String,
    #[serde(with = "timefmt")]
    pub observed_at: DateTime<Utc>,
    /// Whether the target post carried at least one link.
    pub news_linking: bool,
}

/// Text an account posted or reposted, for lexicon building.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub event_cursor: u64,
    pub kind: EventKind,
    pub actor: String,
    #[serde(with = "timefmt")]
    pub observed_at: DateTime<Utc>,
    pub text: String,
    pub lang: Option<String>,
}

/// Everything one chunk of ingested events writes, committed atomically
/// together with the new resume cursor.
#[derive(Debug, Clone, Default)]
pub struct IngestBatch {
    pub observations: Vec<NewsLinkObservation>,
    pub engagements: Vec<Engagement>,
    pub timeline: Vec<TimelineEntry>,
    pub resolved: Vec<ParsedPost>,
    pub last_cursor: Option<u64>,
    pub last_event_at: Option<DateTime<Utc>>,
    pub decode_errors: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StoreStatus {
    pub last_cursor: Option<u64>,
    pub decode_errors: u64,
    pub last_event_at: Option<String>,
    /// Seconds between the newest event's timestamp and the wall clock at
    /// the moment it was committed.
    pub cursor_lag_seconds: Option<i64>,
    pub observations: u64,
    pub size_bytes: u64,
}

/// Post-kind observations grouped back into posts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostLinks {
    pub event_cursor: u64,
    pub domains: Vec<String>,
    pub hashtags: Vec<String>,
}

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS observations (
    id INTEGER PRIMARY KEY,
    event_cursor INTEGER NOT NULL,
    kind INTEGER NOT NULL,
    actor TEXT NOT NULL,
    observed_at INTEGER NOT NULL,
    raw_url TEXT NOT NULL,
    domain TEXT NOT NULL,
    post_uri TEXT NOT NULL,
    hashtags TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS observations_time ON observations(observed_at);
CREATE INDEX IF NOT EXISTS observations_event ON observations(event_cursor, domain);
CREATE TABLE IF NOT EXISTS link_counts (
    hour INTEGER NOT NULL,
    domain TEXT NOT NULL,
    kind INTEGER NOT NULL,
    links INTEGER NOT NULL,
    posts INTEGER NOT NULL,
    PRIMARY KEY (hour, domain, kind)
) WITHOUT ROWID;
CREATE TABLE IF NOT EXISTS engagements (
    event_cursor INTEGER PRIMARY KEY,
    kind INTEGER NOT NULL,
    actor TEXT NOT NULL,
    author TEXT NOT NULL,
    post_uri TEXT NOT NULL,
    observed_at INTEGER NOT NULL,
    news_linking INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS engagements_time ON engagements(observed_at);
CREATE TABLE IF NOT EXISTS timeline (
    event_cursor INTEGER PRIMARY KEY,
    kind INTEGER NOT NULL,
    actor TEXT NOT NULL,
    observed_at INTEGER NOT NULL,
    text TEXT NOT NULL,
    lang TEXT
);
CREATE INDEX IF NOT EXISTS timeline_time ON timeline(observed_at);
CREATE TABLE IF NOT EXISTS resolved_posts (uri TEXT PRIMARY KEY, post TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS jobs (
    kind TEXT NOT NULL,
    window TEXT NOT NULL,
    result TEXT NOT NULL,
    PRIMARY KEY (kind, window)
);
"#;

fn kind_code(kind: EventKind) -> i64 {
    match kind {
        EventKind::Post => 0,
        EventKind::Repost => 1,
        EventKind::Like => 2,
        EventKind::Other => 3,
    }
}

fn kind_from_code(code: i64) -> EventKind {
    match code {
        0 => EventKind::Post,
        1 => EventKind::Repost,
        2 => EventKind::Like,
        _ => EventKind::Other,
    }
}

fn hour_of(ts: &DateTime<Utc>) -> i64 {
    ts.timestamp().div_euclid(3600) * 3600
}

fn configure(conn: &Connection) -> Result<()> {
    conn.busy_timeout(std::time::Duration::from_secs(5))?;
    conn.pragma_update(None, "journal_mode", "WAL")?;
    conn.pragma_update(None, "synchronous", "NORMAL")?;
    Ok(())
}

pub struct Store {
    path: PathBuf,
    writer: Option<Mutex<Connection>>,
    readers: Mutex<Vec<Connection>>,
    _lock: Option<File>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).field("writable", &self.writer.is_some()).finish()
    }
}

impl Store {
    /// Open (creating if needed) as the single writer.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let lock_path = lock_path(&path);
        let lock = File::options().create(true).truncate(false).write(true).open(&lock_path)?;
        if lock.try_lock().is_err() {
            return Err(StoreError::Locked(path));
        }
        let conn = Connection::open(&path)?;
        configure(&conn)?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self { path, writer: Some(Mutex::new(conn)), readers: Mutex::new(Vec::new()), _lock: Some(lock) })
    }

    /// Open for queries only. Creates the schema if the file is new so a
    /// server can start before the first ingest.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let conn = Connection::open(&path)?;
        configure(&conn)?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self { path, writer: None, readers: Mutex::new(vec![conn]), _lock: None })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let writer = self.writer.as_ref().ok_or(StoreError::ReadOnly)?;
        let mut conn = writer.lock().expect("writer lock poisoned");
        let tx = conn.transaction()?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    /// Run `f` inside one read transaction, so it sees a single snapshot.
    pub(crate) fn read<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let pooled = self.readers.lock().expect("reader pool poisoned").pop();
        let mut conn = match pooled {
            Some(c) => c,
            None => {
                let c = Connection::open(&self.path)?;
                configure(&c)?;
                c
            }
        };
        let out = {
            let tx = conn.transaction()?;
            let out = f(&tx);
            tx.finish()?;
            out
        };
        self.readers.lock().expect("reader pool poisoned").push(conn);
        out
    }

    /// Append one observation.
    pub fn record(&self, obs: &NewsLinkObservation) -> Result<()> {
        self.write(|tx| insert_observation(tx, obs))
    }

    /// Commit a chunk of ingest output. Rows from events at or below the
    /// stored resume cursor are dropped, so replaying a chunk is a no-op.
    pub fn commit_batch(&self, batch: &IngestBatch) -> Result<()> {
        self.write(|tx| {
            let stored = meta_u64(tx, "last_cursor")?;
            let fresh = |cursor: u64| stored.is_none_or(|s| cursor > s);
            for obs in batch.observations.iter().filter(|o| fresh(o.event_cursor)) {
                insert_observation(tx, obs)?;
            }
            let mut stmt =
                tx.prepare_cached("INSERT OR IGNORE INTO engagements VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)")?;
            for e in batch.engagements.iter().filter(|e| fresh(e.event_cursor)) {
                stmt.execute(params![
                    e.event_cursor as i64,
                    kind_code(e.kind),
                    e.actor,
                    e.author,
                    e.post_uri,
                    e.observed_at.timestamp(),
                    e.news_linking
                ])?;
            }
            let mut stmt = tx.prepare_cached("INSERT OR IGNORE INTO timeline VALUES (?1, ?2, ?3, ?4, ?5, ?6)")?;
            for t in batch.timeline.iter().filter(|t| fresh(t.event_cursor)) {
                stmt.execute(params![
                    t.event_cursor as i64,
                    kind_code(t.kind),
                    t.actor,
                    t.observed_at.timestamp(),
                    t.text,
                    t.lang
                ])?;
            }
            let mut stmt = tx.prepare_cached("INSERT OR IGNORE INTO resolved_posts VALUES (?1, ?2)")?;
            for post in &batch.resolved {
                let json = serde_json::to_string(post).map_err(|e| StoreError::Corrupt(e.to_string()))?;
                stmt.execute(params![post.post_uri, json])?;
            }
            if let Some(cursor) = batch.last_cursor {
                if fresh(cursor) {
                    set_meta(tx, "last_cursor", &cursor.to_string())?;
                }
            }
            if batch.decode_errors > 0 {
                let prior = meta_u64(tx, "decode_errors")?.unwrap_or(0);
                set_meta(tx, "decode_errors", &(prior + batch.decode_errors).to_string())?;
            }
            if let Some(at) = batch.last_event_at {
                set_meta(tx, "last_event_at", &timefmt::format(&at))?;
                let lag = Utc::now().timestamp() - at.timestamp();
                set_meta(tx, "cursor_lag_seconds", &lag.to_string())?;
            }
            Ok(())
        })
    }

    pub fn last_cursor(&self) -> Result<Option<u64>> {
        self.read(|tx| meta_u64(tx, "last_cursor"))
    }

    pub fn status(&self) -> Result<StoreStatus> {
        self.read(|tx| {
            let observations: i64 = tx.query_row("SELECT COUNT(*) FROM observations", [], |r| r.get(0))?;
            let pages: i64 = tx.query_row("PRAGMA page_count", [], |r| r.get(0))?;
            let page_size: i64 = tx.query_row("PRAGMA page_size", [], |r| r.get(0))?;
            Ok(StoreStatus {
                last_cursor: meta_u64(tx, "last_cursor")?,
                decode_errors: meta_u64(tx, "decode_errors")?.unwrap_or(0),
                last_event_at: meta(tx, "last_event_at")?,
                cursor_lag_seconds: meta(tx, "cursor_lag_seconds")?.and_then(|v| v.parse().ok()),
                observations: observations as u64,
                size_bytes: (pages * page_size) as u64,
            })
        })
    }

    /// Delete all timestamped rows strictly older than `cutoff`.
    pub fn purge_older_than(&self, cutoff: DateTime<Utc>) -> Result<u64> {
        let secs = cutoff.timestamp();
        self.write(|tx| {
            let mut removed = tx.execute("DELETE FROM observations WHERE observed_at < ?1", [secs])? as u64;
            removed += tx.execute("DELETE FROM link_counts WHERE hour + 3600 <= ?1", [secs])? as u64;
            removed += tx.execute("DELETE FROM engagements WHERE observed_at < ?1", [secs])? as u64;
            removed += tx.execute("DELETE FROM timeline WHERE observed_at < ?1", [secs])? as u64;
            Ok(removed)
        })
    }

    /// Earliest and latest observation hour, if any.
    pub fn observation_span(&self) -> Result<Option<(DateTime<Utc>, DateTime<Utc>)>> {
        self.read(|tx| {
            let span: (Option<i64>, Option<i64>) =
                tx.query_row("SELECT MIN(hour), MAX(hour) FROM link_counts", [], |r| Ok((r.get(0)?, r.get(1)?)))?;
            Ok(match span {
                (Some(lo), Some(hi)) => Some((timefmt::from_unix(lo), timefmt::from_unix(hi + 3600))),
                _ => None,
            })
        })
    }

    pub fn observations(&self, window: Window) -> Result<Vec<NewsLinkObservation>> {
        let (from, to) = window.unix_bounds();
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT event_cursor, kind, actor, observed_at, raw_url, domain, post_uri, hashtags
                 FROM observations WHERE observed_at >= ?1 AND observed_at < ?2 ORDER BY id",
            )?;
            let rows = stmt.query_map([from, to], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, i64>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, i64>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                    r.get::<_, String>(6)?,
                    r.get::<_, String>(7)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (cursor, kind, actor, at, raw_url, domain, post_uri, tags) = row?;
                out.push(NewsLinkObservation {
                    event_cursor: cursor as u64,
                    event_kind: kind_from_code(kind),
                    actor_id: actor,
                    observed_at: timefmt::from_unix(at),
                    raw_url,
                    domain,
                    post_uri,
                    hashtags: serde_json::from_str(&tags).map_err(|e| StoreError::Corrupt(e.to_string()))?,
                });
            }
            Ok(out)
        })
    }

    /// Link counts per domain over the window, for the given kinds.
    pub fn domain_counts(&self, window: Window, kinds: KindSet, dedup: Dedup) -> Result<BTreeMap<String, u64>> {
        let (from, to) = window.unix_bounds();
        let column = match dedup {
            Dedup::PerLink => "links",
            Dedup::PerPost => "posts",
        };
        // link_counts is hourly; an unaligned window edge reads from raw rows
        let aligned = |t: i64| t == i64::MIN || t == i64::MAX || t.rem_euclid(3600) == 0;
        if !(aligned(from) && aligned(to)) {
            return self.domain_counts_raw(from, to, kinds, dedup);
        }
        self.read(|tx| {
            let sql = format!(
                "SELECT domain, SUM({column}) FROM link_counts
                 WHERE hour >= ?1 AND hour < ?2 AND kind IN ({}) GROUP BY domain",
                kinds.sql_list()
            );
            let mut stmt = tx.prepare(&sql)?;
            let rows = stmt.query_map([from, to], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)?)))?;
            let mut out = BTreeMap::new();
            for row in rows {
                let (domain, n) = row?;
                out.insert(domain, n as u64);
            }
            Ok(out)
        })
    }

    fn domain_counts_raw(&self, from: i64, to: i64, kinds: KindSet, dedup: Dedup) -> Result<BTreeMap<String, u64>> {
        let count = match dedup {
            Dedup::PerLink => "COUNT(*)",
            Dedup::PerPost => "COUNT(DISTINCT event_cursor)",
        };
        self.read(|tx| {
            let sql = format!(
                "SELECT domain, {count} FROM observations
                 WHERE observed_at >= ?1 AND observed_at < ?2 AND kind IN ({}) GROUP BY domain",
                kinds.sql_list()
            );
            let mut stmt = tx.prepare(&sql)?;
            let rows = stmt.query_map([from, to], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)?)))?;
            let mut out = BTreeMap::new();
            for row in rows {
                let (domain, n) = row?;
                out.insert(domain, n as u64);
            }
            Ok(out)
        })
    }

    /// Posts (not reposts or likes) with at least one link, with their
    /// link domains and hashtags.
    pub fn post_links(&self, window: Window) -> Result<Vec<PostLinks>> {
        let mut posts: BTreeMap<u64, PostLinks> = BTreeMap::new();
        for obs in self.observations(window)? {
            if obs.event_kind != EventKind::Post {
                continue;
            }
            let entry = posts.entry(obs.event_cursor).or_insert_with(|| PostLinks {
                event_cursor: obs.event_cursor,
                domains: Vec::new(),
                hashtags: obs.hashtags.clone(),
            });
            entry.domains.push(obs.domain);
        }
        Ok(posts.into_values().collect())
    }

    pub fn engagements(&self, window: Window) -> Result<Vec<Engagement>> {
        let (from, to) = window.unix_bounds();
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT event_cursor, kind, actor, author, post_uri, observed_at, news_linking
                 FROM engagements WHERE observed_at >= ?1 AND observed_at < ?2 ORDER BY event_cursor",
            )?;
            let rows = stmt.query_map([from, to], |r| {
                Ok(Engagement {
                    event_cursor: r.get::<_, i64>(0)? as u64,
                    kind: kind_from_code(r.get(1)?),
                    actor: r.get(2)?,
                    author: r.get(3)?,
                    post_uri: r.get(4)?,
                    observed_at: timefmt::from_unix(r.get(5)?),
                    news_linking: r.get(6)?,
                })
            })?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })
    }

    pub fn timeline(&self, window: Window) -> Result<Vec<TimelineEntry>> {
        let (from, to) = window.unix_bounds();
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT event_cursor, kind, actor, observed_at, text, lang
                 FROM timeline WHERE observed_at >= ?1 AND observed_at < ?2 ORDER BY event_cursor",
            )?;
            let rows = stmt.query_map([from, to], |r| {
                Ok(TimelineEntry {
                    event_cursor: r.get::<_, i64>(0)? as u64,
                    kind: kind_from_code(r.get(1)?),
                    actor: r.get(2)?,
                    observed_at: timefmt::from_unix(r.get(3)?),
                    text: r.get(4)?,
                    lang: r.get(5)?,
                })
            })?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })
    }

    /// Most recently stored resolved posts, up to `limit`, for warming the
    /// resolver cache after a restart.
    pub fn resolved_posts(&self, limit: usize) -> Result<Vec<ParsedPost>> {
        self.read(|tx| {
            let mut stmt = tx.prepare("SELECT post FROM resolved_posts ORDER BY rowid DESC LIMIT ?1")?;
            let rows = stmt.query_map([limit as i64], |r| r.get::<_, String>(0))?;
            let mut out = Vec::new();
            for row in rows {
                out.push(serde_json::from_str(&row?).map_err(|e| StoreError::Corrupt(e.to_string()))?);
            }
            out.reverse();
            Ok(out)
        })
    }

    pub fn put_job(&self, kind: &str, window: &Window, result: &str) -> Result<()> {
        self.write(|tx| {
            tx.execute("INSERT OR REPLACE INTO jobs VALUES (?1, ?2, ?3)", params![kind, window.to_string(), result])?;
            Ok(())
        })
    }

    pub fn job(&self, kind: &str, window: &Window) -> Result<Option<String>> {
        self.read(|tx| {
            Ok(tx
                .query_row(
                    "SELECT result FROM jobs WHERE kind = ?1 AND window = ?2",
                    params![kind, window.to_string()],
                    |r| r.get(0),
                )
                .optional()?)
        })
    }
}

fn lock_path(db: &Path) -> PathBuf {
    let mut name = db.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".lock");
    db.with_file_name(name)
}

fn insert_observation(tx: &Transaction<'_>, obs: &NewsLinkObservation) -> Result<()> {
    let kind = kind_code(obs.event_kind);
    let first_for_event: bool = tx
        .prepare_cached("SELECT 1 FROM observations WHERE event_cursor = ?1 AND domain = ?2 AND kind = ?3 LIMIT 1")?
        .query_row(params![obs.event_cursor as i64, obs.domain, kind], |_| Ok(()))
        .optional()?
        .is_none();
    let tags = serde_json::to_string(&obs.hashtags).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    tx.prepare_cached(
        "INSERT INTO observations (event_cursor, kind, actor, observed_at, raw_url, domain, post_uri, hashtags)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
    )?
    .execute(params![
        obs.event_cursor as i64,
        kind,
        obs.actor_id,
        obs.observed_at.timestamp(),
        obs.raw_url,
        obs.domain,
        obs.post_uri,
        tags
    ])?;
    tx.prepare_cached(
        "INSERT INTO link_counts (hour, domain, kind, links, posts) VALUES (?1, ?2, ?3, 1, ?4)
         ON CONFLICT (hour, domain, kind) DO UPDATE SET links = links + 1, posts = posts + excluded.posts",
    )?
    .execute(params![hour_of(&obs.observed_at), obs.domain, kind, first_for_event as i64])?;
    Ok(())
}

fn meta(tx: &Transaction<'_>, key: &str) -> Result<Option<String>> {
    Ok(tx.query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0)).optional()?)
}

fn meta_u64(tx: &Transaction<'_>, key: &str) -> Result<Option<u64>> {
    match meta(tx, key)? {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| StoreError::Corrupt(format!("meta {key}={v}"))),
    }
}

fn set_meta(tx: &Transaction<'_>, key: &str, value: &str) -> Result<()> {
    tx.execute("INSERT OR REPLACE INTO meta VALUES (?1, ?2)", [key, value])?;
    Ok(())
}
