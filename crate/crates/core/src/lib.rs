//! Ingestion, storage and analysis of news links shared on Bluesky.

pub mod analytics;
pub mod bsky;
pub mod config;
pub mod event;
pub mod fixture;
pub mod ingest;
pub mod parser;
pub mod pipeline;
pub mod ratings;
pub mod resolver;
pub mod store;
pub mod timefmt;
