//! Hashtag co-occurrence graph over posts with rated links.
//!
//! Each post carrying a rated link is classed unreliable or reliable; an
//! edge between two tags counts the posts of each class they share, and
//! its weight is `(w_ut - w_t) / (w_ut + w_t)`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::str::FromStr;
use thiserror::Error;

use super::graph::WeightedGraph;
use super::kcore;
use crate::ratings::{RatingTable, Reliability};
use crate::store::{PostLinks, Store, StoreError};
use crate::timefmt::Window;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("window is empty")]
    EmptyWindow,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Where a post with both reliable and unreliable links is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedPolicy {
    #[default]
    Unreliable,
    Reliable,
    Exclude,
}

impl FromStr for MixedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unreliable" => Ok(MixedPolicy::Unreliable),
            "reliable" => Ok(MixedPolicy::Reliable),
            "exclude" => Ok(MixedPolicy::Exclude),
            other => Err(format!("mixed policy must be unreliable, reliable or exclude, got {other:?}")),
        }
    }
}

/// Edge weight from class counts. Requires `w_ut + w_t >= 1`.
pub fn edge_weight(w_ut: u64, w_t: u64) -> f64 {
    debug_assert!(w_ut + w_t > 0, "edge without posts");
    (w_ut as f64 - w_t as f64) / (w_ut + w_t) as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub w_ut: u64,
    pub w_t: u64,
}

impl EdgeCounts {
    pub fn total(&self) -> u64 {
        self.w_ut + self.w_t
    }

    pub fn weight(&self) -> f64 {
        edge_weight(self.w_ut, self.w_t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagEdge {
    pub source: String,
    pub target: String,
    pub w_ut: u64,
    pub w_t: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagNode {
    pub tag: String,
    pub node_weight: f64,
    pub degree: usize,
}

#[derive(Debug, Clone, Default)]
pub struct HashtagGraph {
    pub graph: WeightedGraph<EdgeCounts>,
}

/// Reliability class of a post, or `None` when it has no rated link (or
/// is mixed and excluded).
pub fn post_class(domains: &[String], ratings: &RatingTable, mixed: MixedPolicy) -> Option<Reliability> {
    let mut unreliable = false;
    let mut reliable = false;
    for d in domains {
        match ratings.reliability(d) {
            Reliability::Unreliable => unreliable = true,
            Reliability::Reliable => reliable = true,
            Reliability::Unrated => {}
        }
    }
    match (unreliable, reliable) {
        (true, true) => match mixed {
            MixedPolicy::Unreliable => Some(Reliability::Unreliable),
            MixedPolicy::Reliable => Some(Reliability::Reliable),
            MixedPolicy::Exclude => None,
        },
        (true, false) => Some(Reliability::Unreliable),
        (false, true) => Some(Reliability::Reliable),
        (false, false) => None,
    }
}

pub fn build_hashtag_graph(
    posts: &[PostLinks],
    ratings: &RatingTable,
    min_cooccurrence: u64,
    mixed: MixedPolicy,
) -> HashtagGraph {
    let mut full: WeightedGraph<EdgeCounts> = WeightedGraph::new();
    for post in posts {
        let Some(class) = post_class(&post.domains, ratings, mixed) else { continue };
        let tags: BTreeSet<&str> = post.hashtags.iter().map(String::as_str).collect();
        let tags: Vec<&str> = tags.into_iter().collect();
        for (i, a) in tags.iter().enumerate() {
            for b in &tags[i + 1..] {
                let (ia, ib) = (full.add_node(a), full.add_node(b));
                if full.edge(ia, ib).is_none() {
                    full.add_edge(ia, ib, EdgeCounts::default());
                }
                let counts = full.edge_mut(ia, ib).expect("edge just added");
                match class {
                    Reliability::Unreliable => counts.w_ut += 1,
                    _ => counts.w_t += 1,
                }
            }
        }
    }

    // drop light edges, then the nodes they leave isolated
    let min = min_cooccurrence.max(1);
    let mut graph = WeightedGraph::new();
    let mut kept: Vec<(&str, &str, EdgeCounts)> = full
        .edges()
        .filter(|(_, _, c)| c.total() >= min)
        .map(|(a, b, c)| {
            let (la, lb) = (full.label(a), full.label(b));
            if la <= lb {
                (la, lb, *c)
            } else {
                (lb, la, *c)
            }
        })
        .collect();
    kept.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    for (a, b, c) in kept {
        let (ia, ib) = (graph.add_node(a), graph.add_node(b));
        graph.add_edge(ia, ib, c);
    }
    HashtagGraph { graph }
}

/// Graph for the posts observed in `window`.
pub fn hashtag_graph_for_window(
    store: &Store,
    window: Window,
    ratings: &RatingTable,
    min_cooccurrence: u64,
    mixed: MixedPolicy,
) -> Result<HashtagGraph, GraphError> {
    if window.is_empty() {
        return Err(GraphError::EmptyWindow);
    }
    let posts = store.post_links(window)?;
    Ok(build_hashtag_graph(&posts, ratings, min_cooccurrence, mixed))
}

impl HashtagGraph {
    pub fn k_core(&self, k: usize) -> HashtagGraph {
        HashtagGraph { graph: kcore::k_core(&self.graph, k) }
    }

    pub fn max_k_core(&self) -> Option<(usize, HashtagGraph)> {
        kcore::max_k_core(&self.graph).map(|(k, g)| (k, HashtagGraph { graph: g }))
    }

    /// Edges sorted by `(source, target)` with `source < target`.
    pub fn edges(&self) -> Vec<HashtagEdge> {
        let g = &self.graph;
        let mut out: Vec<HashtagEdge> = g
            .edges()
            .map(|(a, b, c)| {
                let (x, y) = (g.label(a), g.label(b));
                let (source, target) = if x <= y { (x, y) } else { (y, x) };
                HashtagEdge {
                    source: source.to_string(),
                    target: target.to_string(),
                    w_ut: c.w_ut,
                    w_t: c.w_t,
                    weight: c.weight(),
                }
            })
            .collect();
        out.sort_by(|x, y| (&x.source, &x.target).cmp(&(&y.source, &y.target)));
        out
    }

    /// Nodes with at least one edge, sorted by tag. A node's weight is the
    /// mean weight of its incident edges.
    pub fn nodes(&self) -> Vec<HashtagNode> {
        let g = &self.graph;
        let mut out: Vec<HashtagNode> = (0..g.node_count())
            .filter(|&i| g.degree(i) > 0)
            .map(|i| {
                let sum: f64 = g.neighbors(i).map(|j| g.edge(i, j).expect("adjacent").weight()).sum();
                HashtagNode { tag: g.label(i).to_string(), node_weight: sum / g.degree(i) as f64, degree: g.degree(i) }
            })
            .collect();
        out.sort_by(|a, b| a.tag.cmp(&b.tag));
        out
    }

    pub fn write_edges_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "w_ut", "w_t", "weight"])?;
        for e in self.edges() {
            w.write_record([e.source, e.target, e.w_ut.to_string(), e.w_t.to_string(), e.weight.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_nodes_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tag", "node_weight", "degree"])?;
        for n in self.nodes() {
            w.write_record([n.tag, n.node_weight.to_string(), n.degree.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
