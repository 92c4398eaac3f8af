//! Frame decoding. Replay frames are JSONL lines; live frames are the
//! binary `subscribeRepos` envelope (DAG-CBOR header + body, commit
//! blocks as a CAR archive).

use chrono::{DateTime, Utc};
use ciborium::Value;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::car::{self, link_bytes};
use crate::bsky::{FeedPost, FeedSubjectRecord};
use crate::event::{
    AtUri, EventKind, FirehoseEvent, PostRecord, StrongRef, LIKE_COLLECTION, POST_COLLECTION, REPOST_COLLECTION,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawFrame {
    Line(String),
    Binary(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Event(FirehoseEvent),
    /// A well-formed frame the pipeline does not track.
    Skip {
        cursor: Option<u64>,
    },
    /// The relay could not serve from the requested cursor; it continues
    /// from its head.
    CursorGap {
        message: String,
    },
    /// Error frame (`op = -1`) from the relay.
    ServerError {
        error: String,
        message: Option<String>,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("invalid replay line: {0}")]
    Replay(String),
    #[error("invalid frame envelope: {0}")]
    Envelope(String),
    #[error("invalid commit blocks: {0}")]
    Car(#[from] car::CarError),
    #[error("invalid record {path}: {message}")]
    Record { path: String, message: String },
}

pub fn decode_frame(raw: &RawFrame) -> Result<Decoded, DecodeError> {
    match raw {
        RawFrame::Line(line) => decode_replay_line(line),
        RawFrame::Binary(bytes) => decode_binary_frame(bytes, Utc::now()),
    }
}

#[derive(Debug, Deserialize)]
struct ReplaySubject {
    uri: String,
    cid: String,
}

#[derive(Debug, Deserialize)]
struct ReplayLine {
    cursor: u64,
    kind: String,
    actor: String,
    created_at: String,
    #[serde(default)]
    record: Option<PostRecord>,
    #[serde(default)]
    subject: Option<ReplaySubject>,
    /// Optional record key; defaults to the cursor.
    #[serde(default)]
    rkey: Option<String>,
}

/// Cursor of a replay line, if the line is well-formed enough to have one.
pub(crate) fn peek_replay_cursor(line: &str) -> Option<u64> {
    #[derive(Deserialize)]
    struct Peek {
        cursor: u64,
    }
    serde_json::from_str::<Peek>(line).ok().map(|p| p.cursor)
}

pub fn decode_replay_line(line: &str) -> Result<Decoded, DecodeError> {
    let parsed: ReplayLine = serde_json::from_str(line).map_err(|e| DecodeError::Replay(e.to_string()))?;
    let kind: EventKind = match parsed.kind.parse() {
        Ok(EventKind::Other) | Err(_) => return Ok(Decoded::Skip { cursor: Some(parsed.cursor) }),
        Ok(kind) => kind,
    };
    let created_at = DateTime::parse_from_rfc3339(&parsed.created_at)
        .map_err(|e| DecodeError::Replay(format!("created_at: {e}")))?
        .with_timezone(&Utc);
    let collection = match kind {
        EventKind::Post => POST_COLLECTION,
        EventKind::Repost => REPOST_COLLECTION,
        _ => LIKE_COLLECTION,
    };
    let rkey = parsed.rkey.unwrap_or_else(|| parsed.cursor.to_string());
    let uri = AtUri::new(&parsed.actor, collection, &rkey).to_string();
    let subject = match parsed.subject {
        Some(s) => Some(StrongRef::new(s.uri, s.cid).map_err(|e| DecodeError::Replay(e.to_string()))?),
        None => None,
    };
    let record = if kind == EventKind::Post { parsed.record } else { None };
    let subject = if kind == EventKind::Post { None } else { subject };
    FirehoseEvent::new(parsed.cursor, parsed.actor, kind, created_at, uri, record, subject)
        .map(Decoded::Event)
        .map_err(|e| DecodeError::Replay(e.to_string()))
}

#[derive(Serialize)]
struct ReplaySubjectOut<'a> {
    uri: &'a str,
    cid: &'a str,
}

#[derive(Serialize)]
struct ReplayLineOut<'a> {
    cursor: u64,
    kind: &'a str,
    actor: &'a str,
    created_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<&'a PostRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subject: Option<ReplaySubjectOut<'a>>,
}

/// Serialize an event as one replay line (without trailing newline).
pub fn encode_replay_line(event: &FirehoseEvent) -> String {
    let out = ReplayLineOut {
        cursor: event.cursor,
        kind: event.kind.as_str(),
        actor: &event.actor,
        created_at: event.created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        record: event.record.as_ref(),
        subject: event.subject.as_ref().map(|s| ReplaySubjectOut { uri: &s.uri, cid: &s.cid }),
    };
    serde_json::to_string(&out).expect("replay line serializes")
}

fn get<'a>(map: &'a Value, key: &str) -> Option<&'a Value> {
    map.as_map()?.iter().find(|(k, _)| k.as_text() == Some(key)).map(|(_, v)| v)
}

fn get_text<'a>(map: &'a Value, key: &str) -> Option<&'a str> {
    get(map, key)?.as_text()
}

fn get_int(map: &Value, key: &str) -> Option<i128> {
    get(map, key)?.as_integer().map(i128::from)
}

fn parse_time(raw: Option<&str>) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw?).ok().map(|t| t.with_timezone(&Utc))
}

/// Decode one binary firehose frame. `received_at` stands in for the
/// timestamp when neither the record nor the commit carries one.
pub fn decode_binary_frame(bytes: &[u8], received_at: DateTime<Utc>) -> Result<Decoded, DecodeError> {
    let envelope = |m: &str| DecodeError::Envelope(m.to_string());
    let mut input = bytes;
    let header: Value =
        ciborium::de::from_reader(&mut input).map_err(|e| DecodeError::Envelope(format!("header: {e}")))?;
    let body: Value = ciborium::de::from_reader(&mut input).map_err(|e| DecodeError::Envelope(format!("body: {e}")))?;
    if !input.is_empty() {
        return Err(envelope("trailing bytes after body"));
    }
    let op = get_int(&header, "op").ok_or_else(|| envelope("header without op"))?;
    if op == -1 {
        return Ok(Decoded::ServerError {
            error: get_text(&body, "error").unwrap_or("unknown").to_string(),
            message: get_text(&body, "message").map(str::to_string),
        });
    }
    if op != 1 {
        return Err(envelope("unknown op"));
    }
    let seq = get_int(&body, "seq").and_then(|s| u64::try_from(s).ok());
    match get_text(&header, "t").ok_or_else(|| envelope("header without type"))? {
        "#commit" => decode_commit(&body, received_at),
        "#info" => match get_text(&body, "name") {
            Some("OutdatedCursor") => {
                Ok(Decoded::CursorGap { message: get_text(&body, "message").unwrap_or("outdated cursor").to_string() })
            }
            _ => Ok(Decoded::Skip { cursor: None }),
        },
        _ => Ok(Decoded::Skip { cursor: seq }),
    }
}

fn decode_commit(body: &Value, received_at: DateTime<Utc>) -> Result<Decoded, DecodeError> {
    let envelope = |m: &str| DecodeError::Envelope(m.to_string());
    let seq = get_int(body, "seq").and_then(|s| u64::try_from(s).ok()).ok_or_else(|| envelope("commit without seq"))?;
    let repo = get_text(body, "repo").ok_or_else(|| envelope("commit without repo"))?;
    let ops = get(body, "ops").and_then(Value::as_array).ok_or_else(|| envelope("commit without ops"))?;
    let commit_time = parse_time(get_text(body, "time"));

    // one record per commit in practice; the first tracked create wins
    let Some((path, kind, cid)) = ops.iter().find_map(|op| {
        if get_text(op, "action")? != "create" {
            return None;
        }
        let path = get_text(op, "path")?;
        let kind = EventKind::from_collection(path.split('/').next()?);
        (kind != EventKind::Other).then(|| (path, kind, get(op, "cid")))
    }) else {
        return Ok(Decoded::Skip { cursor: Some(seq) });
    };
    let record_error = |message: String| DecodeError::Record { path: path.to_string(), message };

    let blocks = match get(body, "blocks") {
        Some(Value::Bytes(b)) => b,
        _ => return Err(envelope("commit without blocks")),
    };
    let car = car::read_car(blocks)?;
    let cid = cid.and_then(link_bytes).ok_or_else(|| record_error("op without cid link".into()))?;
    let block = car.blocks.get(cid).ok_or_else(|| record_error("record block missing from CAR".into()))?;
    let record: Value = ciborium::de::from_reader(block.as_slice()).map_err(|e| record_error(e.to_string()))?;

    let (collection, rkey) = path.split_once('/').ok_or_else(|| record_error("path without rkey".into()))?;
    let uri = AtUri::new(repo, collection, rkey).to_string();
    let record_time = parse_time(get_text(&record, "createdAt"));
    let created_at = record_time.or(commit_time).unwrap_or(received_at);

    let (post, subject) = match kind {
        EventKind::Post => {
            let post: FeedPost = record.deserialized().map_err(|e| record_error(e.to_string()))?;
            (Some(post.to_record()), None)
        }
        _ => {
            let rec: FeedSubjectRecord = record.deserialized().map_err(|e| record_error(e.to_string()))?;
            StrongRef::new(rec.subject.uri.clone(), rec.subject.cid.clone())
                .map_err(|e| record_error(e.to_string()))?;
            (None, Some(rec.subject))
        }
    };
    FirehoseEvent::new(seq, repo, kind, created_at, uri, post, subject)
        .map(Decoded::Event)
        .map_err(|e| record_error(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_post_line() {
        let line = r#"{"cursor":1,"kind":"post","actor":"did:plc:a","created_at":"2024-06-14T12:00:00Z","record":{"text":"hi","langs":["en"],"facets":[{"type":"link","value":"https://nytimes.com/x"}],"embed_uris":[]},"extra":true}"#;
        let Decoded::Event(event) = decode_replay_line(line).unwrap() else { panic!("expected event") };
        assert_eq!(event.kind, EventKind::Post);
        assert_eq!(event.cursor, 1);
        assert_eq!(event.uri, "at://did:plc:a/app.bsky.feed.post/1");
        assert_eq!(event.record.unwrap().facets.len(), 1);
    }

    #[test]
    fn replay_follow_is_skipped() {
        let line = r#"{"cursor":7,"kind":"follow","actor":"did:plc:a","created_at":"2024-06-14T12:00:00Z"}"#;
        assert_eq!(decode_replay_line(line).unwrap(), Decoded::Skip { cursor: Some(7) });
    }

    #[test]
    fn replay_like_needs_valid_subject() {
        let ok = r#"{"cursor":2,"kind":"like","actor":"did:plc:b","created_at":"2024-06-14T12:00:00Z","subject":{"uri":"at://did:plc:a/app.bsky.feed.post/1","cid":"bafy"}}"#;
        let Decoded::Event(event) = decode_replay_line(ok).unwrap() else { panic!() };
        assert_eq!(event.subject.unwrap().target_actor(), "did:plc:a");
        for bad in [
            r#"{"cursor":2,"kind":"like","actor":"did:plc:b","created_at":"2024-06-14T12:00:00Z"}"#,
            r#"{"cursor":2,"kind":"like","actor":"did:plc:b","created_at":"2024-06-14T12:00:00Z","subject":{"uri":"","cid":"x"}}"#,
            r#"{"cursor":2,"kind":"post","actor":"did:plc:b","created_at":"2024-06-14T12:00:00Z"}"#,
            r#"{"cursor":2,"kind":"post","actor":"did:plc:b","created_at":"yesterday","record":{}}"#,
            r#"{"cursor":"2","kind":"post"}"#,
            r#"{"cursor":2,"kind":"po"#,
        ] {
            assert!(decode_replay_line(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn replay_encoding_round_trips() {
        let line = r#"{"cursor":3,"kind":"repost","actor":"did:plc:c","created_at":"2024-06-14T12:00:05Z","subject":{"uri":"at://did:plc:a/app.bsky.feed.post/1","cid":"bafy"}}"#;
        let Decoded::Event(event) = decode_replay_line(line).unwrap() else { panic!() };
        assert_eq!(encode_replay_line(&event), line);
    }

    #[test]
    fn garbage_binary_is_envelope_error() {
        assert!(matches!(decode_binary_frame(&[0xff, 0x00, 0x13], Utc::now()), Err(DecodeError::Envelope(_))));
    }
}
