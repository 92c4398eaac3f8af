//! Deterministic synthetic corpora: replay files, a getPosts manifest and
//! ratings files, plus a binary frame encoder for live-mode fixtures.
//!
//! Everything here is a pure function of its spec and seed, so a corpus
//! can be regenerated and compared byte-for-byte with a checked-in copy.

use chrono::{DateTime, Duration, Utc};
use ciborium::Value;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bsky::{Author, FeedPost, PostView};
use crate::event::{EventKind, Facet, FirehoseEvent, PostRecord, StrongRef, POST_COLLECTION};
use crate::ingest::car::{cid_for, cid_to_string, link_value, write_car};
use crate::ingest::encode_replay_line;
use crate::ratings::RatingFiles;
use crate::timefmt;

/// Most-shared reliable domains, most popular first.
pub const TOP_RELIABLE: [&str; 10] = [
    "theguardian.com",
    "nytimes.com",
    "bbc.com",
    "washingtonpost.com",
    "spiegel.de",
    "cnn.com",
    "reuters.com",
    "nbcnews.com",
    "npr.org",
    "rawstory.com",
];

/// Most-shared unreliable domains, most popular first.
pub const TOP_UNRELIABLE: [&str; 10] = [
    "dailykos.com",
    "msnbc.com",
    "thegatewaypundit.com",
    "wsws.org",
    "democracydocket.com",
    "ohiocapitaljournal.com",
    "middleeastmonitor.com",
    "trtworld.com",
    "newsfromthestates.com",
    "globaltimes.cn",
];

const UNRATED: [&str; 5] = ["youtube.com", "bsky.app", "substack.com", "github.com", "wikipedia.org"];

const SHARED_WORDS: [&str; 12] =
    ["today", "people", "report", "really", "news", "think", "new", "week", "read", "story", "good", "time"];

const COMMUNITY_WORDS: [[&str; 8]; 4] = [
    ["climate", "heat", "wildfire", "science", "emissions", "ocean", "solar", "drought"],
    ["election", "ballot", "voters", "senate", "campaign", "polls", "debate", "turnout"],
    ["ukraine", "kyiv", "frontline", "drones", "sanctions", "nato", "missile", "ceasefire"],
    ["football", "euro", "goal", "striker", "match", "penalty", "league", "coach"],
];

const COMMUNITY_TAGS: [[&str; 5]; 4] = [
    ["climate", "heatwave", "science", "climatecrisis", "energy"],
    ["election2024", "vote", "democracy", "scotus", "politics"],
    ["ukraine", "standwithukraine", "russia", "nato", "war"],
    ["euro2024", "football", "soccer", "sports", "copaamerica"],
];

const SHARED_TAGS: [&str; 4] = ["news", "breaking", "bluesky", "media"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub events: usize,
    pub seed: u64,
    #[serde(with = "timefmt")]
    pub start: DateTime<Utc>,
    pub span_secs: i64,
    /// Up to four communities with distinct vocabulary and engagement.
    pub communities: usize,
    pub actors_per_community: usize,
    pub external_posts: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            events: 10_000,
            seed: 2024,
            start: timefmt::parse("2024-06-14T00:00:00Z").expect("valid timestamp"),
            span_secs: 3 * 86_400,
            communities: 4,
            actors_per_community: 40,
            external_posts: 300,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub events: usize,
    pub posts: usize,
    pub reposts: usize,
    pub likes: usize,
    pub other: usize,
    pub last_cursor: u64,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub lines: Vec<String>,
    pub posts: Vec<PostView>,
    pub scores_csv: String,
    pub mbfc_csv: String,
    pub allsides_csv: String,
    pub newsguard_csv: String,
    pub summary: CorpusSummary,
}

#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub events: PathBuf,
    pub posts: PathBuf,
    pub scores: PathBuf,
    pub mbfc: PathBuf,
    pub allsides: PathBuf,
    pub newsguard: PathBuf,
    pub summary: PathBuf,
}

impl CorpusPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            events: dir.join("events.jsonl"),
            posts: dir.join("posts.json"),
            scores: dir.join("scores.csv"),
            mbfc: dir.join("mbfc.csv"),
            allsides: dir.join("allsides.csv"),
            newsguard: dir.join("newsguard.csv"),
            summary: dir.join("summary.json"),
        }
    }

    pub fn rating_files(&self) -> RatingFiles {
        RatingFiles {
            scores: self.scores.clone(),
            mbfc: Some(self.mbfc.clone()),
            allsides: Some(self.allsides.clone()),
            newsguard: Some(self.newsguard.clone()),
        }
    }
}

struct StreamPost {
    uri: String,
    author: String,
    community: usize,
    has_links: bool,
}

fn actor_did(community: usize, i: usize) -> String {
    format!("did:plc:g{community}u{i:03}")
}

fn fake_cid(rng: &mut ChaCha8Rng) -> String {
    let bytes: [u8; 16] = rng.gen();
    cid_to_string(&cid_for(&bytes))
}

/// Domain popularity: Table-style reliable and unreliable leaders with
/// strictly decreasing weights, plus unrated sites.
fn domain_weights() -> Vec<(&'static str, u32)> {
    let mut out = Vec::new();
    for (i, d) in TOP_RELIABLE.iter().enumerate() {
        out.push((*d, 60 - 5 * i as u32));
    }
    for (i, d) in TOP_UNRELIABLE.iter().enumerate() {
        out.push((*d, 12 - i as u32));
    }
    for (i, d) in UNRATED.iter().enumerate() {
        out.push((*d, 20 - 3 * i as u32));
    }
    out
}

/// A raw URL for `domain`, with the cosmetic variation seen in the wild.
fn url_for(domain: &str, n: u64, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..6) {
        0 => format!("https://www.{domain}/2024/06/story-{n}"),
        1 => format!("http://{}/a/{n}?utm_source=bsky", domain.to_uppercase()),
        2 => format!("https://news.{domain}/item/{n}"),
        _ => format!("https://{domain}/article/{n}"),
    }
}

fn post_record(community: usize, domains: &[&str], n: u64, rng: &mut ChaCha8Rng) -> PostRecord {
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..rng.gen_range(4..9) {
        let w = if rng.gen_bool(0.6) { COMMUNITY_WORDS[community].choose(rng) } else { SHARED_WORDS.choose(rng) };
        words.push(w.expect("non-empty word list"));
    }
    let mut text = words.join(" ");
    let mut facets = Vec::new();
    let tag_count = rng.gen_range(0..4);
    let mut tags: Vec<&str> = Vec::new();
    for _ in 0..tag_count {
        let t = if rng.gen_bool(0.75) { COMMUNITY_TAGS[community].choose(rng) } else { SHARED_TAGS.choose(rng) };
        let t = t.expect("non-empty tag list");
        if !tags.contains(t) {
            tags.push(t);
        }
    }
    for t in &tags {
        // some tags only as facets, some only inline, some both
        match rng.gen_range(0..3) {
            0 => facets.push(Facet::tag(*t)),
            1 => write!(text, " #{}", capitalize(t)).expect("string write"),
            _ => {
                facets.push(Facet::tag(*t));
                write!(text, " #{t}").expect("string write");
            }
        }
    }
    let mut embed_uris = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        let url = url_for(d, n * 10 + i as u64, rng);
        if i == 0 && rng.gen_bool(0.5) {
            embed_uris.push(url.clone());
            if rng.gen_bool(0.3) {
                facets.push(Facet::link(url));
            }
        } else {
            facets.push(Facet::link(url));
        }
    }
    let langs =
        if domains.contains(&"spiegel.de") && rng.gen_bool(0.5) { vec!["de".into()] } else { vec!["en".into()] };
    PostRecord { text, langs, facets, embed_uris }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn pick_domains(rng: &mut ChaCha8Rng, dist: &WeightedIndex<u32>, table: &[(&'static str, u32)]) -> Vec<&'static str> {
    let n = match rng.gen_range(0..10) {
        0..=4 => 0,
        5..=8 => 1,
        _ => 2,
    };
    (0..n).map(|_| table[dist.sample(rng)].0).collect()
}

impl Corpus {
    pub fn generate(spec: &CorpusSpec) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let communities = spec.communities.clamp(1, COMMUNITY_WORDS.len());
        let table = domain_weights();
        let dist = WeightedIndex::new(table.iter().map(|(_, w)| *w)).expect("positive weights");

        // older posts reachable only through the resolver
        let mut external: Vec<(PostView, usize)> = Vec::new();
        for n in 0..spec.external_posts {
            let community = n % communities;
            let author = actor_did(community, rng.gen_range(0..spec.actors_per_community));
            let mut domains = pick_domains(&mut rng, &dist, &table);
            domains.truncate(1);
            let mut record = post_record(community, &domains, 1_000_000 + n as u64, &mut rng);
            // the manifest shape carries a single embed; keep links as facets
            record.facets.extend(record.embed_uris.drain(..).map(Facet::link));
            let created = spec.start - Duration::days(1) + Duration::seconds(n as i64 * 60);
            let view = PostView {
                uri: format!("at://{author}/{POST_COLLECTION}/ext{n}"),
                cid: fake_cid(&mut rng),
                author: Author { did: author, handle: None },
                record: FeedPost::from_record(&record, Some(timefmt::format(&created))),
                indexed_at: None,
            };
            external.push((view, community));
        }

        let mut stream: Vec<StreamPost> = Vec::new();
        let mut lines = Vec::with_capacity(spec.events);
        let mut summary = CorpusSummary::default();
        let step = spec.span_secs as f64 / spec.events.max(1) as f64;
        for i in 0..spec.events {
            let cursor = i as u64 + 1;
            let created_at = spec.start + Duration::seconds((i as f64 * step) as i64);
            let community = rng.gen_range(0..communities);
            let actor = actor_did(community, rng.gen_range(0..spec.actors_per_community));
            let roll = rng.gen_range(0..100);
            let kind = match roll {
                _ if stream.is_empty() || roll < 40 => EventKind::Post,
                40..=54 => EventKind::Repost,
                55..=94 => EventKind::Like,
                _ => EventKind::Other,
            };
            match kind {
                EventKind::Post => {
                    let domains = pick_domains(&mut rng, &dist, &table);
                    let record = post_record(community, &domains, cursor, &mut rng);
                    let uri = format!("at://{actor}/{POST_COLLECTION}/{cursor}");
                    let event = FirehoseEvent::new(cursor, &actor, kind, created_at, &uri, Some(record), None)
                        .expect("valid post");
                    stream.push(StreamPost { uri, author: actor, community, has_links: !domains.is_empty() });
                    lines.push(encode_replay_line(&event));
                    summary.posts += 1;
                }
                EventKind::Repost | EventKind::Like => {
                    let target_roll = rng.gen_range(0..100);
                    let subject_uri = if target_roll < 5 {
                        format!("at://did:plc:gone{:03}/{POST_COLLECTION}/missing{cursor}", rng.gen_range(0..50))
                    } else if target_roll < 30 {
                        let same: Vec<&(PostView, usize)> = external.iter().filter(|(_, c)| *c == community).collect();
                        let pool =
                            if rng.gen_bool(0.85) && !same.is_empty() { same } else { external.iter().collect() };
                        pool.choose(&mut rng).map(|(v, _)| v.uri.clone()).expect("external posts")
                    } else {
                        // favour recent, same-community, news-linking posts
                        let recent = &stream[stream.len().saturating_sub(400)..];
                        let same: Vec<&StreamPost> = recent
                            .iter()
                            .filter(|p| p.community == community && (p.has_links || rng.gen_bool(0.3)))
                            .collect();
                        let target = if rng.gen_bool(0.85) && !same.is_empty() {
                            same.choose(&mut rng).copied()
                        } else {
                            recent.choose(&mut rng)
                        };
                        let target = target.expect("stream has posts");
                        debug_assert!(target.author.starts_with("did:plc:"));
                        target.uri.clone()
                    };
                    let subject = StrongRef::new(subject_uri, fake_cid(&mut rng)).expect("valid subject");
                    let collection =
                        if kind == EventKind::Repost { "app.bsky.feed.repost" } else { "app.bsky.feed.like" };
                    let uri = format!("at://{actor}/{collection}/{cursor}");
                    let event = FirehoseEvent::new(cursor, &actor, kind, created_at, uri, None, Some(subject))
                        .expect("valid engagement");
                    lines.push(encode_replay_line(&event));
                    if kind == EventKind::Repost {
                        summary.reposts += 1;
                    } else {
                        summary.likes += 1;
                    }
                }
                EventKind::Other => {
                    lines.push(
                        serde_json::json!({
                            "cursor": cursor,
                            "kind": "other",
                            "actor": actor,
                            "created_at": timefmt::format(&created_at),
                        })
                        .to_string(),
                    );
                    summary.other += 1;
                }
            }
            summary.events += 1;
            summary.last_cursor = cursor;
        }

        let (scores_csv, mbfc_csv, allsides_csv, newsguard_csv) = ratings_csvs();
        Corpus {
            spec: spec.clone(),
            lines,
            posts: external.into_iter().map(|(v, _)| v).collect(),
            scores_csv,
            mbfc_csv,
            allsides_csv,
            newsguard_csv,
            summary,
        }
    }

    pub fn events_jsonl(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    pub fn posts_json(&self) -> String {
        serde_json::to_string_pretty(&self.posts).expect("posts serialize") + "\n"
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<CorpusPaths> {
        std::fs::create_dir_all(dir)?;
        let paths = CorpusPaths::in_dir(dir);
        std::fs::write(&paths.events, self.events_jsonl())?;
        std::fs::write(&paths.posts, self.posts_json())?;
        std::fs::write(&paths.scores, &self.scores_csv)?;
        std::fs::write(&paths.mbfc, &self.mbfc_csv)?;
        std::fs::write(&paths.allsides, &self.allsides_csv)?;
        std::fs::write(&paths.newsguard, &self.newsguard_csv)?;
        std::fs::write(&paths.summary, serde_json::to_string_pretty(&self.summary).expect("summary") + "\n")?;
        Ok(paths)
    }
}

/// Scores and the three orientation files. Orientation coverage overlaps
/// on purpose so that tier precedence matters.
fn ratings_csvs() -> (String, String, String, String) {
    let mut scores = String::from("domain,score,lang\n");
    for (i, d) in TOP_RELIABLE.iter().enumerate() {
        let lang = if *d == "spiegel.de" { "de" } else { "en" };
        writeln!(scores, "{d},{},{lang}", 100 - 3 * i as u32).expect("string write");
    }
    for (i, d) in TOP_UNRELIABLE.iter().enumerate() {
        writeln!(scores, "{d},{},en", 15 + 4 * i as u32).expect("string write");
    }
    let mbfc = "domain,orientation\n\
        theguardian.com,Left-Center\n\
        nytimes.com,Left-Center\n\
        bbc.com,Least Biased\n\
        washingtonpost.com,Left-Center\n\
        thegatewaypundit.com,Extreme Right\n\
        wsws.org,Far Left\n\
        globaltimes.cn,Right\n"
        .to_string();
    let allsides = "domain,orientation\n\
        theguardian.com,Left\n\
        nytimes.com,Lean Left\n\
        cnn.com,Left\n\
        reuters.com,Center\n\
        npr.org,Lean Left\n\
        dailykos.com,Left\n\
        msnbc.com,Left\n\
        thegatewaypundit.com,Right\n"
        .to_string();
    let newsguard = "domain,orientation\n\
        bbc.com,Left\n\
        spiegel.de,Lean Left\n\
        nbcnews.com,Lean Left\n\
        rawstory.com,Left\n\
        democracydocket.com,Left\n\
        middleeastmonitor.com,Left\n\
        trtworld.com,Right\n\
        msnbc.com,Lean Left\n"
        .to_string();
    (scores, mbfc, allsides, newsguard)
}

/// Replay lines for posts that each carry exactly one link. For every day
/// from `start`, `per_day` lists `(domain, count)`; posts of a day are
/// spread evenly across it.
pub fn single_link_posts(start: DateTime<Utc>, days: usize, per_day: &[(&str, usize)]) -> Vec<String> {
    let per_day_total: usize = per_day.iter().map(|(_, n)| n).sum();
    let mut lines = Vec::with_capacity(days * per_day_total);
    let mut cursor = 0u64;
    for day in 0..days {
        let mut slot = 0;
        for (domain, count) in per_day {
            for _ in 0..*count {
                cursor += 1;
                let offset = (slot as i64 * 86_400) / per_day_total.max(1) as i64;
                slot += 1;
                let at = start + Duration::days(day as i64) + Duration::seconds(offset);
                let actor = format!("did:plc:fixture{:03}", cursor % 97);
                let record = PostRecord {
                    text: format!("reading {domain}"),
                    langs: vec!["en".into()],
                    facets: vec![Facet::link(format!("https://{domain}/story/{cursor}"))],
                    embed_uris: Vec::new(),
                };
                let uri = format!("at://{actor}/{POST_COLLECTION}/{cursor}");
                let event = FirehoseEvent::new(cursor, actor, EventKind::Post, at, uri, Some(record), None)
                    .expect("valid post");
                lines.push(encode_replay_line(&event));
            }
        }
    }
    lines
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

fn frame(header: Vec<(Value, Value)>, body: Vec<(Value, Value)>) -> Vec<u8> {
    let mut out = Vec::new();
    ciborium::ser::into_writer(&Value::Map(header), &mut out).expect("header encodes");
    ciborium::ser::into_writer(&Value::Map(body), &mut out).expect("body encodes");
    out
}

/// A `#commit` frame creating one record at `path` (`collection/rkey`).
pub fn encode_commit_frame<R: Serialize>(seq: u64, repo: &str, time: &str, path: &str, record: &R) -> Vec<u8> {
    let mut block = Vec::new();
    ciborium::ser::into_writer(record, &mut block).expect("record encodes");
    let cid = cid_for(&block);
    let car = write_car(std::slice::from_ref(&cid), &[(cid.clone(), block)]);
    let op =
        Value::Map(vec![(text("action"), text("create")), (text("path"), text(path)), (text("cid"), link_value(&cid))]);
    frame(
        vec![(text("op"), Value::Integer(1.into())), (text("t"), text("#commit"))],
        vec![
            (text("seq"), Value::Integer(seq.into())),
            (text("repo"), text(repo)),
            (text("rebase"), Value::Bool(false)),
            (text("tooBig"), Value::Bool(false)),
            (text("commit"), link_value(&cid)),
            (text("ops"), Value::Array(vec![op])),
            (text("blocks"), Value::Bytes(car)),
            (text("time"), text(time)),
        ],
    )
}

/// An `#info` frame, e.g. `OutdatedCursor`.
pub fn encode_info_frame(name: &str, message: &str) -> Vec<u8> {
    frame(
        vec![(text("op"), Value::Integer(1.into())), (text("t"), text("#info"))],
        vec![(text("name"), text(name)), (text("message"), text(message))],
    )
}

/// An error frame (`op = -1`).
pub fn encode_error_frame(error: &str, message: &str) -> Vec<u8> {
    frame(
        vec![(text("op"), Value::Integer((-1).into()))],
        vec![(text("error"), text(error)), (text("message"), text(message))],
    )
}

/// What a decoder must recover from the checked-in live frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub seq: u64,
    pub kind: String,
    pub actor: String,
    pub uri: String,
    pub created_at: String,
    pub subject_uri: String,
    pub subject_cid: String,
}

/// A `#commit` frame carrying one like, with its manifest.
pub fn golden_like_frame() -> (Vec<u8>, FrameManifest) {
    let manifest = FrameManifest {
        seq: 4242,
        kind: "like".into(),
        actor: "did:plc:liker".into(),
        uri: "at://did:plc:liker/app.bsky.feed.like/3kgolden".into(),
        created_at: "2024-06-14T12:00:05Z".into(),
        subject_uri: "at://did:plc:author/app.bsky.feed.post/3kpost".into(),
        subject_cid: "bafyreib".into(),
    };
    let record = crate::bsky::FeedSubjectRecord {
        subject: StrongRef::new(manifest.subject_uri.clone(), manifest.subject_cid.clone()).expect("valid ref"),
        created_at: Some(manifest.created_at.clone()),
    };
    let bytes = encode_commit_frame(
        manifest.seq,
        &manifest.actor,
        "2024-06-14T12:30:00Z",
        "app.bsky.feed.like/3kgolden",
        &record,
    );
    (bytes, manifest)
}

/// Writes `like.frame` and `like.frame.json` into `dir`.
pub fn write_golden_frames(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let (bytes, manifest) = golden_like_frame();
    std::fs::write(dir.join("like.frame"), bytes)?;
    std::fs::write(dir.join("like.frame.json"), serde_json::to_string_pretty(&manifest).expect("manifest") + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsky::FeedSubjectRecord;
    use crate::ingest::decode::{decode_binary_frame, decode_replay_line};
    use crate::ingest::Decoded;

    fn small() -> CorpusSpec {
        CorpusSpec { events: 500, external_posts: 30, ..Default::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Corpus::generate(&small());
        let b = Corpus::generate(&small());
        assert_eq!(a.lines, b.lines);
        assert_eq!(a.posts_json(), b.posts_json());
        let other = Corpus::generate(&CorpusSpec { seed: 1, ..small() });
        assert_ne!(a.lines, other.lines);
    }

    #[test]
    fn every_line_decodes_and_counts_match() {
        let corpus = Corpus::generate(&small());
        let mut summary = CorpusSummary::default();
        for line in &corpus.lines {
            match decode_replay_line(line).unwrap() {
                Decoded::Event(e) => match e.kind {
                    EventKind::Post => summary.posts += 1,
                    EventKind::Repost => summary.reposts += 1,
                    EventKind::Like => summary.likes += 1,
                    EventKind::Other => unreachable!(),
                },
                Decoded::Skip { .. } => summary.other += 1,
                other => panic!("{other:?}"),
            }
            summary.events += 1;
        }
        summary.last_cursor = corpus.lines.len() as u64;
        assert_eq!(summary, corpus.summary);
    }

    #[test]
    fn like_commit_frame_decodes() {
        let record = FeedSubjectRecord {
            subject: StrongRef::new("at://did:plc:a/app.bsky.feed.post/3k", "bafyx").unwrap(),
            created_at: Some("2024-06-14T12:00:00.123Z".into()),
        };
        let bytes = encode_commit_frame(42, "did:plc:b", "2024-06-14T12:00:01Z", "app.bsky.feed.like/3kl", &record);
        let Decoded::Event(e) = decode_binary_frame(&bytes, Utc::now()).unwrap() else { panic!() };
        assert_eq!(e.cursor, 42);
        assert_eq!(e.kind, EventKind::Like);
        assert_eq!(e.uri, "at://did:plc:b/app.bsky.feed.like/3kl");
        assert_eq!(e.subject.unwrap().uri, "at://did:plc:a/app.bsky.feed.post/3k");
        assert_eq!(timefmt::format(&e.created_at), "2024-06-14T12:00:00Z");
    }

    #[test]
    fn single_link_posts_spread_over_days() {
        let start = timefmt::parse("2024-06-14T00:00:00Z").unwrap();
        let lines = single_link_posts(start, 2, &[("a.com", 3), ("b.com", 1)]);
        assert_eq!(lines.len(), 8);
        let Decoded::Event(last) = decode_replay_line(&lines[7]).unwrap() else { panic!() };
        assert_eq!(timefmt::format(&last.created_at), "2024-06-15T18:00:00Z");
    }
}
