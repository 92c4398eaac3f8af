//! Decoded firehose events and the record shapes they carry.

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const POST_COLLECTION: &str = "app.bsky.feed.post";
pub const REPOST_COLLECTION: &str = "app.bsky.feed.repost";
pub const LIKE_COLLECTION: &str = "app.bsky.feed.like";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Post,
    Repost,
    Like,
    Other,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Post => "post",
            EventKind::Repost => "repost",
            EventKind::Like => "like",
            EventKind::Other => "other",
        }
    }

    /// Collection NSID for the record types we track.
    pub fn from_collection(nsid: &str) -> EventKind {
        match nsid {
            POST_COLLECTION => EventKind::Post,
            REPOST_COLLECTION => EventKind::Repost,
            LIKE_COLLECTION => EventKind::Like,
            _ => EventKind::Other,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "post" => Ok(EventKind::Post),
            "repost" => Ok(EventKind::Repost),
            "like" => Ok(EventKind::Like),
            "other" => Ok(EventKind::Other),
            other => Err(format!("unknown event kind {other:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AtUriError {
    #[error("AT-URI must start with at://: {0:?}")]
    Scheme(String),
    #[error("AT-URI must name an authority, a collection and a record key: {0:?}")]
    Incomplete(String),
}

/// `at://<authority>/<collection>/<rkey>`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtUri {
    pub authority: String,
    pub collection: String,
    pub rkey: String,
}

impl AtUri {
    pub fn new(authority: &str, collection: &str, rkey: &str) -> Self {
        Self { authority: authority.to_string(), collection: collection.to_string(), rkey: rkey.to_string() }
    }

    pub fn parse(raw: &str) -> Result<Self, AtUriError> {
        let rest = raw.strip_prefix("at://").ok_or_else(|| AtUriError::Scheme(raw.to_string()))?;
        let mut parts = rest.splitn(3, '/');
        let authority = parts.next().unwrap_or_default();
        let collection = parts.next().unwrap_or_default();
        let rkey = parts.next().unwrap_or_default();
        if authority.is_empty() || collection.is_empty() || rkey.is_empty() || rkey.contains('/') {
            return Err(AtUriError::Incomplete(raw.to_string()));
        }
        Ok(Self::new(authority, collection, rkey))
    }
}

impl fmt::Display for AtUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at://{}/{}/{}", self.authority, self.collection, self.rkey)
    }
}

/// Pointer from a repost or like to the record it targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrongRef {
    pub uri: String,
    pub cid: String,
}

impl StrongRef {
    pub fn new(uri: impl Into<String>, cid: impl Into<String>) -> Result<Self, AtUriError> {
        let uri = uri.into();
        AtUri::parse(&uri)?;
        Ok(Self { uri, cid: cid.into() })
    }

    /// DID (or handle) of the account that owns the target record.
    pub fn target_actor(&self) -> &str {
        self.uri.strip_prefix("at://").and_then(|rest| rest.split('/').next()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetKind {
    Link,
    Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    #[serde(rename = "type")]
    pub kind: FacetKind,
    pub value: String,
}

impl Facet {
    pub fn link(value: impl Into<String>) -> Self {
        Self { kind: FacetKind::Link, value: value.into() }
    }

    pub fn tag(value: impl Into<String>) -> Self {
        Self { kind: FacetKind::Tag, value: value.into() }
    }
}

/// Flattened post record: the parts of `app.bsky.feed.post` the pipeline reads.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub langs: Vec<String>,
    #[serde(default)]
    pub facets: Vec<Facet>,
    #[serde(default)]
    pub embed_uris: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("post event without a record")]
    MissingRecord,
    #[error("{0} event without a subject reference")]
    MissingSubject(EventKind),
    #[error("events of kind other are never delivered")]
    OtherKind,
}

/// One decoded event. Immutable once built; the constructor enforces that
/// posts carry a record and reposts/likes carry a subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirehoseEvent {
    pub cursor: u64,
    pub actor: String,
    pub kind: EventKind,
    pub created_at: DateTime<Utc>,
    /// AT-URI of the record this event created.
    pub uri: String,
    pub record: Option<PostRecord>,
    pub subject: Option<StrongRef>,
}

impl FirehoseEvent {
    pub fn new(
        cursor: u64,
        actor: impl Into<String>,
        kind: EventKind,
        created_at: DateTime<Utc>,
        uri: impl Into<String>,
        record: Option<PostRecord>,
        subject: Option<StrongRef>,
    ) -> Result<Self, EventError> {
        match kind {
            EventKind::Post if record.is_none() => return Err(EventError::MissingRecord),
            EventKind::Repost | EventKind::Like if subject.is_none() => return Err(EventError::MissingSubject(kind)),
            EventKind::Other => return Err(EventError::OtherKind),
            _ => {}
        }
        Ok(Self {
            cursor,
            actor: actor.into(),
            kind,
            created_at: created_at.trunc_subsecs(0),
            uri: uri.into(),
            record,
            subject,
        })
    }
}
