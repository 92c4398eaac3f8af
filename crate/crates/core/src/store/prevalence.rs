//! Absolute and Relative prevalence series.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{Result, Store, StoreError};
use crate::event::EventKind;
use crate::ratings::{RatingTable, Reliability};
use crate::timefmt::{self, TimeRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Hour,
    Day,
}

impl Granularity {
    pub fn seconds(self) -> i64 {
        match self {
            Granularity::Hour => 3_600,
            Granularity::Day => 86_400,
        }
    }

    pub fn align(self, ts: i64) -> i64 {
        ts.div_euclid(self.seconds()) * self.seconds()
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hour" => Ok(Granularity::Hour),
            "day" => Ok(Granularity::Day),
            other => Err(format!("granularity must be hour or day, got {other:?}")),
        }
    }
}

/// How repeated links to one domain inside a single event are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dedup {
    #[default]
    PerLink,
    PerPost,
}

impl FromStr for Dedup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_link" => Ok(Dedup::PerLink),
            "per_post" => Ok(Dedup::PerPost),
            other => Err(format!("dedup must be per_link or per_post, got {other:?}")),
        }
    }
}

/// Subset of {post, repost, like}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KindSet {
    pub posts: bool,
    pub reposts: bool,
    pub likes: bool,
}

impl Default for KindSet {
    fn default() -> Self {
        Self::ALL
    }
}

impl KindSet {
    pub const ALL: KindSet = KindSet { posts: true, reposts: true, likes: true };

    pub fn contains(&self, kind: EventKind) -> bool {
        match kind {
            EventKind::Post => self.posts,
            EventKind::Repost => self.reposts,
            EventKind::Like => self.likes,
            EventKind::Other => false,
        }
    }

    pub(crate) fn sql_list(&self) -> String {
        let codes: Vec<&str> = [(self.posts, "0"), (self.reposts, "1"), (self.likes, "2")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, c)| *c)
            .collect();
        if codes.is_empty() {
            "-1".to_string()
        } else {
            codes.join(",")
        }
    }
}

impl FromStr for KindSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = KindSet { posts: false, reposts: false, likes: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "post" | "posts" => set.posts = true,
                "repost" | "reposts" => set.reposts = true,
                "like" | "likes" => set.likes = true,
                other => return Err(format!("unknown kind {other:?}")),
            }
        }
        if !(set.posts || set.reposts || set.likes) {
            return Err("kinds must name at least one of post, repost, like".into());
        }
        Ok(set)
    }
}

impl fmt::Display for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.posts, "post"), (self.reposts, "repost"), (self.likes, "like")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevalenceBucket {
    #[serde(with = "timefmt")]
    pub bucket_start: DateTime<Utc>,
    pub total_links: u64,
    pub total_rated: u64,
    pub reliable: u64,
    pub unreliable: u64,
}

impl PrevalenceBucket {
    fn empty(start: i64) -> Self {
        Self { bucket_start: timefmt::from_unix(start), total_links: 0, total_rated: 0, reliable: 0, unreliable: 0 }
    }

    /// Unreliable share of rated links; `None` when nothing was rated.
    pub fn ratio(&self) -> Option<f64> {
        (self.total_rated > 0).then(|| self.unreliable as f64 / self.total_rated as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePoint {
    #[serde(with = "timefmt")]
    pub bucket_start: DateTime<Utc>,
    pub ratio: Option<f64>,
}

pub const PREVALENCE_CSV_HEADER: &str = "bucket_start,total_links,total_rated,reliable,unreliable";

pub fn write_prevalence_csv<W: std::io::Write>(buckets: &[PrevalenceBucket], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREVALENCE_CSV_HEADER.split(','))?;
    for b in buckets {
        w.write_record([
            timefmt::format(&b.bucket_start),
            b.total_links.to_string(),
            b.total_rated.to_string(),
            b.reliable.to_string(),
            b.unreliable.to_string(),
        ])?;
    }
    w.flush()
}

impl Store {
    /// Zero-filled buckets whose start lies in `[align(from), to)`. Buckets
    /// are atomic: a bucket that starts inside the range counts in full.
    pub fn query_absolute(
        &self,
        range: TimeRange,
        granularity: Granularity,
        dedup: Dedup,
        kinds: KindSet,
        ratings: &RatingTable,
        max_buckets: u64,
    ) -> Result<Vec<PrevalenceBucket>> {
        let step = granularity.seconds();
        let first = granularity.align(range.from.timestamp());
        let end = range.to.timestamp();
        if range.is_empty() {
            return Ok(Vec::new());
        }
        let count = (end - first + step - 1) / step;
        if count as u64 > max_buckets {
            return Err(StoreError::RangeTooLarge { requested: count as u64, limit: max_buckets });
        }
        let last_end = first + count * step;
        let column = match dedup {
            Dedup::PerLink => "links",
            Dedup::PerPost => "posts",
        };
        let rows: Vec<(i64, String, i64)> = self.read(|tx| {
            let sql = format!(
                "SELECT hour, domain, SUM({column}) FROM link_counts
                 WHERE hour >= ?1 AND hour < ?2 AND kind IN ({}) GROUP BY hour, domain",
                kinds.sql_list()
            );
            let mut stmt = tx.prepare(&sql)?;
            let rows = stmt.query_map([first, last_end], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })?;

        let mut buckets: Vec<PrevalenceBucket> =
            (0..count).map(|i| PrevalenceBucket::empty(first + i * step)).collect();
        let mut class_cache: HashMap<String, Reliability> = HashMap::new();
        for (hour, domain, n) in rows {
            let n = n as u64;
            let reliability = *class_cache.entry(domain).or_insert_with_key(|d| ratings.reliability(d));
            let bucket = &mut buckets[((hour - first) / step) as usize];
            bucket.total_links += n;
            match reliability {
                Reliability::Reliable => {
                    bucket.reliable += n;
                    bucket.total_rated += n;
                }
                Reliability::Unreliable => {
                    bucket.unreliable += n;
                    bucket.total_rated += n;
                }
                Reliability::Unrated => {}
            }
        }
        Ok(buckets)
    }

    pub fn query_relative(
        &self,
        range: TimeRange,
        granularity: Granularity,
        dedup: Dedup,
        kinds: KindSet,
        ratings: &RatingTable,
        max_buckets: u64,
    ) -> Result<Vec<RelativePoint>> {
        Ok(self
            .query_absolute(range, granularity, dedup, kinds, ratings, max_buckets)?
            .into_iter()
            .map(|b| RelativePoint { ratio: b.ratio(), bucket_start: b.bucket_start })
            .collect())
    }
}
