//! Wire shapes of the `app.bsky.feed.*` records, as they appear in firehose
//! commit blocks (DAG-CBOR) and in `app.bsky.feed.getPosts` responses (JSON).

use crate::event::{Facet, PostRecord, StrongRef};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedPost {
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub langs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub facets: Vec<RichTextFacet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<Embed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RichTextFacet {
    #[serde(default)]
    pub features: Vec<FacetFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "$type")]
pub enum FacetFeature {
    #[serde(rename = "app.bsky.richtext.facet#link")]
    Link { uri: String },
    #[serde(rename = "app.bsky.richtext.facet#tag")]
    Tag { tag: String },
    #[serde(other)]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "$type")]
pub enum Embed {
    #[serde(rename = "app.bsky.embed.external")]
    External { external: External },
    #[serde(rename = "app.bsky.embed.recordWithMedia")]
    RecordWithMedia { media: Box<Embed> },
    #[serde(other)]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct External {
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedSubjectRecord {
    pub subject: StrongRef,
    #[serde(default)]
    pub created_at: Option<String>,
}

impl Embed {
    fn external_uri(&self) -> Option<&str> {
        match self {
            Embed::External { external } => Some(&external.uri),
            Embed::RecordWithMedia { media } => media.external_uri(),
            Embed::Unknown => None,
        }
    }
}

impl FeedPost {
    pub fn to_record(&self) -> PostRecord {
        let mut facets = Vec::new();
        for feature in self.facets.iter().flat_map(|f| &f.features) {
            match feature {
                FacetFeature::Link { uri } => facets.push(Facet::link(uri.clone())),
                FacetFeature::Tag { tag } => facets.push(Facet::tag(tag.clone())),
                FacetFeature::Unknown => {}
            }
        }
        PostRecord {
            text: self.text.clone(),
            langs: self.langs.clone(),
            facets,
            embed_uris: self.embed.iter().filter_map(|e| e.external_uri()).map(str::to_string).collect(),
        }
    }

    /// Inverse of [`FeedPost::to_record`], used by the fixture tools.
    pub fn from_record(record: &PostRecord, created_at: Option<String>) -> Self {
        let features = record
            .facets
            .iter()
            .map(|f| match f.kind {
                crate::event::FacetKind::Link => FacetFeature::Link { uri: f.value.clone() },
                crate::event::FacetKind::Tag => FacetFeature::Tag { tag: f.value.clone() },
            })
            .collect::<Vec<_>>();
        let facets = if features.is_empty() { Vec::new() } else { vec![RichTextFacet { features }] };
        FeedPost {
            text: record.text.clone(),
            langs: record.langs.clone(),
            facets,
            embed: record.embed_uris.first().map(|uri| Embed::External { external: External { uri: uri.clone() } }),
            created_at,
        }
    }
}

/// One entry of the `posts` array returned by `app.bsky.feed.getPosts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PostView {
    pub uri: String,
    pub cid: String,
    pub author: Author,
    pub record: FeedPost,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indexed_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Author {
    pub did: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GetPostsResponse {
    pub posts: Vec<PostView>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn json_post_flattens_links_tags_and_embed() {
        let raw = json!({
            "$type": "app.bsky.feed.post",
            "text": "read this #News",
            "langs": ["en"],
            "createdAt": "2024-06-14T12:00:00Z",
            "facets": [{
                "index": {"byteStart": 0, "byteEnd": 4},
                "features": [
                    {"$type": "app.bsky.richtext.facet#link", "uri": "https://nytimes.com/a"},
                    {"$type": "app.bsky.richtext.facet#tag", "tag": "News"},
                    {"$type": "app.bsky.richtext.facet#mention", "did": "did:plc:x"}
                ]
            }],
            "embed": {
                "$type": "app.bsky.embed.recordWithMedia",
                "record": {},
                "media": {"$type": "app.bsky.embed.external", "external": {"uri": "https://bbc.com/b", "title": "t"}}
            }
        });
        let post: FeedPost = serde_json::from_value(raw).unwrap();
        let record = post.to_record();
        assert_eq!(record.facets, vec![Facet::link("https://nytimes.com/a"), Facet::tag("News")]);
        assert_eq!(record.embed_uris, vec!["https://bbc.com/b".to_string()]);
        assert_eq!(record.langs, vec!["en".to_string()]);
    }

    #[test]
    fn unknown_embed_is_tolerated() {
        let post: FeedPost = serde_json::from_value(json!({
            "text": "pic",
            "embed": {"$type": "app.bsky.embed.images", "images": []}
        }))
        .unwrap();
        assert!(post.to_record().embed_uris.is_empty());
    }
}
