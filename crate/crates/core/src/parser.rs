//! Link and hashtag extraction from post records.
//!
//! [`normalize_domain`] is the only place a URL becomes a source identity.
//! Rating files go through it on load, so a domain produced here can be
//! looked up in a [`crate::ratings::RatingTable`] as-is.

use crate::event::{EventKind, FacetKind, FirehoseEvent, PostRecord};
use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::sync::LazyLock;
use thiserror::Error;
use url::{Host, Url};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no usable host in {0:?}")]
pub struct Unparseable(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRef {
    pub raw_url: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPost {
    pub post_uri: String,
    pub actor_id: String,
    pub created_at: DateTime<Utc>,
    pub urls: Vec<LinkRef>,
    pub hashtags: Vec<String>,
    pub lang: Option<String>,
    pub text: String,
}

impl ParsedPost {
    pub fn has_links(&self) -> bool {
        !self.urls.is_empty()
    }
}

static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^\w&#])#([\w]+)").expect("hashtag pattern"));

/// Reduce a URL to its registrable domain.
///
/// Host is lowercased, one leading `www.` is dropped and the rest is cut
/// down with the bundled public-suffix list. IP literals come back as-is.
/// Scheme-less input such as `example.com/path` is read as `https://`.
pub fn normalize_domain(raw_url: &str) -> Result<String, Unparseable> {
    let trimmed = raw_url.trim();
    let unparseable = || Unparseable(raw_url.to_string());
    if trimmed.is_empty() || trimmed.chars().any(char::is_whitespace) {
        return Err(unparseable());
    }
    let url = if trimmed.contains("://") {
        Url::parse(trimmed).map_err(|_| unparseable())?
    } else if Url::parse(trimmed).is_ok_and(|u| !u.scheme().contains('.')) {
        // opaque schemes such as mailto: or javascript:
        return Err(unparseable());
    } else {
        Url::parse(&format!("https://{trimmed}")).map_err(|_| unparseable())?
    };
    if !matches!(url.scheme(), "http" | "https") {
        return Err(unparseable());
    }
    match url.host().ok_or_else(unparseable)? {
        Host::Ipv4(ip) => Ok(ip.to_string()),
        Host::Ipv6(ip) => Ok(ip.to_string()),
        Host::Domain(host) => {
            let host = host.trim_end_matches('.').to_ascii_lowercase();
            // "www.com" stays whole
            let host = match host.strip_prefix("www.") {
                Some(rest) if rest.contains('.') => rest,
                _ => &host,
            };
            if !host.contains('.') || host.starts_with('.') || host.contains("..") {
                return Err(unparseable());
            }
            Ok(psl::domain_str(host).unwrap_or(host).to_string())
        }
    }
}

/// Primary language subtag of the record's first declared language.
fn primary_lang(langs: &[String]) -> Option<String> {
    let first = langs.first()?;
    let primary = first.split(['-', '_']).next()?.trim().to_ascii_lowercase();
    (!primary.is_empty()).then_some(primary)
}

fn push_tag(tags: &mut Vec<String>, seen: &mut HashSet<String>, raw: &str) {
    let tag = raw.trim().trim_start_matches('#').to_lowercase();
    if tag.is_empty() || tag.chars().all(|c| c.is_ascii_digit()) {
        return;
    }
    if seen.insert(tag.clone()) {
        tags.push(tag);
    }
}

/// Hashtags from tag facets and `#token`s in the text, case-folded and
/// deduplicated in first-seen order.
pub fn extract_hashtags(record: &PostRecord) -> Vec<String> {
    let mut tags = Vec::new();
    let mut seen = HashSet::new();
    for facet in record.facets.iter().filter(|f| f.kind == FacetKind::Tag) {
        push_tag(&mut tags, &mut seen, &facet.value);
    }
    for cap in HASHTAG.captures_iter(&record.text) {
        push_tag(&mut tags, &mut seen, &cap[1]);
    }
    tags
}

/// Facet links followed by embed URIs, deduplicated on the raw URL.
/// URLs without a usable host are dropped.
pub fn extract_links(record: &PostRecord) -> Vec<LinkRef> {
    let facet_links = record.facets.iter().filter(|f| f.kind == FacetKind::Link).map(|f| f.value.as_str());
    let mut seen = HashSet::new();
    let mut links = Vec::new();
    for raw in facet_links.chain(record.embed_uris.iter().map(String::as_str)) {
        if !seen.insert(raw) {
            continue;
        }
        match normalize_domain(raw) {
            Ok(domain) => links.push(LinkRef { raw_url: raw.to_string(), domain }),
            Err(e) => tracing::debug!("dropping link: {e}"),
        }
    }
    links
}

pub fn parse_record(post_uri: &str, actor_id: &str, created_at: DateTime<Utc>, record: &PostRecord) -> ParsedPost {
    ParsedPost {
        post_uri: post_uri.to_string(),
        actor_id: actor_id.to_string(),
        created_at,
        urls: extract_links(record),
        hashtags: extract_hashtags(record),
        lang: primary_lang(&record.langs),
        text: record.text.clone(),
    }
}

/// Parse a post event. Returns `None` for any other event kind.
pub fn parse_post(event: &FirehoseEvent) -> Option<ParsedPost> {
    if event.kind != EventKind::Post {
        return None;
    }
    let record = event.record.as_ref()?;
    Some(parse_record(&event.uri, &event.actor, event.created_at, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Facet;
    use proptest::prelude::*;

    fn post(record: PostRecord) -> FirehoseEvent {
        FirehoseEvent::new(
            1,
            "did:plc:a",
            EventKind::Post,
            "2024-06-14T12:00:00Z".parse().unwrap(),
            "at://did:plc:a/app.bsky.feed.post/1",
            Some(record),
            None,
        )
        .unwrap()
    }

    #[test]
    fn table_one_hosts() {
        assert_eq!(normalize_domain("http://NYTimes.com/2024/a?b=c").unwrap(), "nytimes.com");
        assert_eq!(normalize_domain("https://www.bbc.com").unwrap(), "bbc.com");
        assert_eq!(normalize_domain("https://www.theguardian.com/us-news/x").unwrap(), "theguardian.com");
    }

    #[test]
    fn suffix_aware_reduction() {
        assert_eq!(normalize_domain("https://news.example.co.uk/story").unwrap(), "example.co.uk");
        assert_eq!(normalize_domain("https://a.b.nytimes.com:8443/x").unwrap(), "nytimes.com");
        // private-section suffixes keep publishers apart
        assert_eq!(normalize_domain("https://alice.blogspot.com/p").unwrap(), "alice.blogspot.com");
        assert_eq!(normalize_domain("https://www.bbc.co.uk/").unwrap(), "bbc.co.uk");
    }

    #[test]
    fn ip_literals_and_bare_hosts() {
        assert_eq!(normalize_domain("http://192.168.0.1/x").unwrap(), "192.168.0.1");
        assert_eq!(normalize_domain("http://[::1]:80/").unwrap(), "::1");
        assert_eq!(normalize_domain("cnn.com/politics").unwrap(), "cnn.com");
        assert_eq!(normalize_domain("HTTPS://WWW.CNN.COM.").unwrap(), "cnn.com");
    }

    #[test]
    fn unparseable_inputs() {
        for bad in ["", "not a url", "mailto:a@b.com", "https://", "http://localhost/", "at://did:plc:a/x/y"] {
            assert!(normalize_domain(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn embed_uri_becomes_domain() {
        let parsed = parse_post(&post(PostRecord {
            embed_uris: vec!["https://www.theguardian.com/us-news/x".into()],
            ..Default::default()
        }))
        .unwrap();
        assert_eq!(parsed.urls.len(), 1);
        assert_eq!(parsed.urls[0].domain, "theguardian.com");
    }

    #[test]
    fn text_hashtags_are_case_folded() {
        let parsed = parse_post(&post(PostRecord { text: "hello #Covid world".into(), ..Default::default() })).unwrap();
        assert!(parsed.urls.is_empty());
        assert_eq!(parsed.hashtags, vec!["covid"]);
    }

    #[test]
    fn facet_and_embed_of_same_url_dedup() {
        let url = "https://www.reuters.com/world/x";
        let parsed = parse_post(&post(PostRecord {
            facets: vec![Facet::link(url)],
            embed_uris: vec![url.into()],
            ..Default::default()
        }))
        .unwrap();
        assert_eq!(parsed.urls.len(), 1);
    }

    #[test]
    fn hashtags_from_facets_and_text_dedup() {
        let record = PostRecord {
            text: "#Election2024 news #election2024 a#b &#39; #123 #über".into(),
            facets: vec![Facet::tag("ELECTION2024"), Facet::tag("#Vote")],
            langs: vec!["en-US".into()],
            ..Default::default()
        };
        let parsed = parse_post(&post(record)).unwrap();
        assert_eq!(parsed.hashtags, vec!["election2024", "vote", "über"]);
        assert_eq!(parsed.lang.as_deref(), Some("en"));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(
            sub in "[a-z]{1,8}",
            name in "[a-z][a-z0-9]{0,10}",
            tld in prop::sample::select(vec!["com", "org", "co.uk", "de", "com.au", "news", "blogspot.com"]),
            www in any::<bool>(),
            upper in any::<bool>(),
            path in "[a-z0-9/]{0,12}",
        ) {
            let mut host = format!("{sub}.{name}.{tld}");
            if www { host = format!("www.{host}"); }
            if upper { host = host.to_uppercase(); }
            let url = format!("https://{host}/{path}");
            let once = normalize_domain(&url).unwrap();
            let twice = normalize_domain(&format!("https://{once}")).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.to_lowercase(), once.clone());
            prop_assert!(!once.starts_with("www."));
        }
    }
}
