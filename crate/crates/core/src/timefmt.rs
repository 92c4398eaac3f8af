//! Timestamp and window helpers. Everything is UTC, whole seconds.

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serializer};
use std::fmt;
use thiserror::Error;

pub fn format(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse(raw: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
    DateTime::parse_from_rfc3339(raw.trim()).map(|t| t.with_timezone(&Utc))
}

pub fn from_unix(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0).single().expect("timestamp in range")
}

pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format(ts))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(d)?;
    parse(&raw).map_err(serde::de::Error::custom)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("window start {0} is after its end {1}")]
    Inverted(String, String),
    #[error("window must be 'all' or '<from>/<to>' in RFC 3339: {0}")]
    Syntax(String),
}

/// Half-open time range `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeRange {
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
}

impl TimeRange {
    pub fn new(from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Self, WindowError> {
        if from > to {
            return Err(WindowError::Inverted(format(&from), format(&to)));
        }
        Ok(Self { from, to })
    }

    pub fn is_empty(&self) -> bool {
        self.from == self.to
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        self.from <= ts && ts < self.to
    }
}

/// Analytics window: a bounded range or everything in the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    All,
    Range(TimeRange),
}

impl Window {
    pub fn parse(raw: &str) -> Result<Self, WindowError> {
        let raw = raw.trim();
        if raw.is_empty() || raw == "all" {
            return Ok(Window::All);
        }
        let (from, to) = raw.split_once('/').ok_or_else(|| WindowError::Syntax(raw.to_string()))?;
        let from = parse(from).map_err(|_| WindowError::Syntax(raw.to_string()))?;
        let to = parse(to).map_err(|_| WindowError::Syntax(raw.to_string()))?;
        Ok(Window::Range(TimeRange::new(from, to)?))
    }

    pub fn range(&self) -> Option<TimeRange> {
        match self {
            Window::All => None,
            Window::Range(r) => Some(*r),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Window::Range(r) if r.is_empty())
    }

    /// Bounds in unix seconds, `[from, to)`.
    pub fn unix_bounds(&self) -> (i64, i64) {
        match self {
            Window::All => (i64::MIN, i64::MAX),
            Window::Range(r) => (r.from.timestamp(), r.to.timestamp()),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::All => f.write_str("all"),
            Window::Range(r) => write!(f, "{}/{}", format(&r.from), format(&r.to)),
        }
    }
}
