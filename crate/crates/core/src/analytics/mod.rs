//! Batch analytics over stored observations.

pub mod audiences;
pub mod graph;
pub mod hashtags;
pub mod kcore;
pub mod lexicon;
pub mod louvain;
pub mod orientation;
pub mod rankfreq;

pub use audiences::{
    detect_audiences, engagement_graph, run_audiences_job, stored_audiences, AudienceConfig, AudienceReport,
};
pub use graph::WeightedGraph;
pub use hashtags::{build_hashtag_graph, edge_weight, hashtag_graph_for_window, HashtagGraph, MixedPolicy};
pub use kcore::{core_numbers, k_core, k_core_nodes, max_k_core};
pub use lexicon::{log_odds, log_odds_delta, tokenize, LogOddsForm, WordCounts, WordDelta};
pub use louvain::{louvain, modularity, LouvainConfig, Partition};
pub use orientation::{orientation_distribution, orientation_for_window, OrientationTable};
pub use rankfreq::{rank_frequency, rank_frequency_for_window, RankClass, RankFrequencyEntry};
