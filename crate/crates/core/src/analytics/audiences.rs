//! Audience segmentation: engagement graph, its densest core, modularity
//! communities inside it, and the words that set each community apart.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::graph::WeightedGraph;
use super::kcore::max_k_core;
use super::lexicon::{log_odds, tokenize, LogOddsForm, WordCounts, WordDelta};
use super::louvain::{louvain, LouvainConfig};
use crate::store::{Engagement, Result, Store, TimelineEntry};
use crate::timefmt::Window;

pub const AUDIENCES_JOB: &str = "audiences";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudienceConfig {
    pub louvain: LouvainConfig,
    /// Only count likes/reposts of posts that carry news links.
    pub news_only: bool,
    pub terms_per_community: usize,
    pub form: LogOddsForm,
}

impl Default for AudienceConfig {
    fn default() -> Self {
        Self {
            louvain: LouvainConfig::default(),
            news_only: true,
            terms_per_community: 200,
            form: LogOddsForm::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: usize,
    pub size: usize,
    pub members: Vec<String>,
    pub total_words: u64,
    pub terms: Vec<WordDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudienceReport {
    pub window: String,
    pub k_max: usize,
    pub core_nodes: usize,
    pub core_edges: usize,
    pub modularity: f64,
    pub communities: Vec<Community>,
}

/// Undirected actor graph; edge weight is the number of likes/reposts
/// between the two accounts in either direction. Self-engagement is
/// dropped.
pub fn engagement_graph(engagements: &[Engagement], news_only: bool) -> WeightedGraph<f64> {
    let mut g = WeightedGraph::new();
    for e in engagements {
        if (news_only && !e.news_linking) || e.actor == e.author {
            continue;
        }
        let (a, b) = (g.add_node(&e.actor), g.add_node(&e.author));
        match g.edge_mut(a, b) {
            Some(w) => *w += 1.0,
            None => {
                g.add_edge(a, b, 1.0);
            }
        }
    }
    g
}

pub fn detect_audiences(
    window: &Window,
    engagements: &[Engagement],
    timeline: &[TimelineEntry],
    config: &AudienceConfig,
) -> AudienceReport {
    let graph = engagement_graph(engagements, config.news_only);
    let Some((k_max, core)) = max_k_core(&graph).filter(|(_, core)| core.edge_count() > 0) else {
        return AudienceReport {
            window: window.to_string(),
            k_max: 0,
            core_nodes: 0,
            core_edges: 0,
            modularity: 0.0,
            communities: Vec::new(),
        };
    };
    let partition = louvain(&core, &config.louvain);
    let community_of: HashMap<&str, usize> =
        (0..core.node_count()).map(|i| (core.label(i), partition.assignment[i])).collect();

    let n = partition.community_count();
    let mut corpora = vec![WordCounts::default(); n];
    for entry in timeline {
        if let Some(&c) = community_of.get(entry.actor.as_str()) {
            corpora[c].add_tokens(tokenize(&entry.text, entry.lang.as_deref()));
        }
    }
    let mut pooled = WordCounts::default();
    for c in &corpora {
        pooled.merge(c);
    }

    let communities = (0..n)
        .map(|c| {
            let mut rest = WordCounts::default();
            for (other, corpus) in corpora.iter().enumerate() {
                if other != c {
                    rest.merge(corpus);
                }
            }
            let mut terms = log_odds(&corpora[c], &rest, &pooled, config.form);
            terms.retain(|t| t.count > 0);
            terms.truncate(config.terms_per_community);
            let mut members: Vec<String> =
                partition.members(c).into_iter().map(|i| core.label(i).to_string()).collect();
            members.sort();
            Community { id: c, size: members.len(), members, total_words: corpora[c].total, terms }
        })
        .collect();

    AudienceReport {
        window: window.to_string(),
        k_max,
        core_nodes: core.node_count(),
        core_edges: core.edge_count(),
        modularity: partition.modularity,
        communities,
    }
}

/// Runs the job over `window` and stores the report for the API.
pub fn run_audiences_job(store: &Store, window: Window, config: &AudienceConfig) -> Result<AudienceReport> {
    let engagements = store.engagements(window)?;
    let timeline = store.timeline(window)?;
    let report = detect_audiences(&window, &engagements, &timeline, config);
    let json = serde_json::to_string(&report).expect("report serializes");
    store.put_job(AUDIENCES_JOB, &window, &json)?;
    Ok(report)
}

pub fn stored_audiences(store: &Store, window: &Window) -> Result<Option<AudienceReport>> {
    Ok(match store.job(AUDIENCES_JOB, window)? {
        Some(raw) => Some(serde_json::from_str(&raw).map_err(|e| crate::store::StoreError::Corrupt(e.to_string()))?),
        None => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventKind;
    use crate::timefmt;

    fn like(cursor: u64, actor: &str, author: &str, news: bool) -> Engagement {
        Engagement {
            event_cursor: cursor,
            kind: EventKind::Like,
            actor: actor.into(),
            author: author.into(),
            post_uri: format!("at://{author}/app.bsky.feed.post/1"),
            observed_at: timefmt::from_unix(0),
            news_linking: news,
        }
    }

    fn say(actor: &str, text: &str) -> TimelineEntry {
        TimelineEntry {
            event_cursor: 0,
            kind: EventKind::Post,
            actor: actor.into(),
            observed_at: timefmt::from_unix(0),
            text: text.into(),
            lang: Some("en".into()),
        }
    }

    #[test]
    fn graph_skips_self_and_non_news() {
        let g = engagement_graph(
            &[like(1, "a", "a", true), like(2, "a", "b", true), like(3, "b", "a", true), like(4, "a", "c", false)],
            true,
        );
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge(0, 1), Some(&2.0));
    }

    #[test]
    fn two_groups_get_distinct_vocabulary() {
        let mut engagements = Vec::new();
        let groups = [["a1", "a2", "a3", "a4"], ["b1", "b2", "b3", "b4"]];
        let mut cursor = 0;
        for g in &groups {
            for x in g {
                for y in g {
                    if x < y {
                        cursor += 1;
                        engagements.push(like(cursor, x, y, true));
                    }
                }
            }
        }
        engagements.push(like(99, "a1", "b1", true));
        let timeline: Vec<_> = groups[0]
            .iter()
            .map(|a| say(a, "climate science"))
            .chain(groups[1].iter().map(|b| say(b, "border taxes")))
            .collect();
        let report = detect_audiences(&Window::All, &engagements, &timeline, &AudienceConfig::default());
        assert_eq!(report.k_max, 3);
        assert_eq!(report.communities.len(), 2);
        let top: Vec<&str> = report.communities.iter().map(|c| c.terms[0].word.as_str()).collect();
        assert!(top.contains(&"climate") || top.contains(&"science"));
        assert!(top.contains(&"border") || top.contains(&"taxes"));
    }
}
