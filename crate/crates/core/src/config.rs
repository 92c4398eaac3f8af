//! Operator configuration: one TOML file, every key overridable by an
//! environment variable `NEWSKY_<KEY>` (e.g. `NEWSKY_BIND=0.0.0.0:9000`).

use figment::providers::{Env, Format, Serialized, Toml};
use figment::Figment;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

use crate::ingest::{IngestConfig, DEFAULT_QUEUE_CAPACITY};
use crate::ratings::{load_ratings, RatingFiles, RatingTable, RatingsError};
use crate::resolver::ResolverConfig;

pub const ENV_PREFIX: &str = "NEWSKY_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    Missing(PathBuf),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store_path: PathBuf,
    pub bind: String,
    pub live_endpoint: String,
    pub resolver_base_url: String,
    /// Serve getPosts from this manifest instead of the network.
    pub resolver_fixture: Option<PathBuf>,
    pub resolver_batch_limit: usize,
    pub resolver_rate_per_sec: u32,
    pub resolver_cache_capacity: usize,
    pub resolver_max_retries: u32,
    pub queue_capacity: usize,
    pub max_buckets: u64,
    pub score_file: Option<PathBuf>,
    pub mbfc_file: Option<PathBuf>,
    pub allsides_file: Option<PathBuf>,
    pub newsguard_orientation_file: Option<PathBuf>,
    /// Poll interval for ratings file changes; 0 disables reloading.
    pub ratings_reload_secs: u64,
    pub static_dir: Option<PathBuf>,
    pub seed: u64,
    pub retention_days: Option<u32>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store_path: PathBuf::from("newsky.db"),
            bind: "127.0.0.1:8080".into(),
            live_endpoint: "wss://bsky.network/xrpc/com.atproto.sync.subscribeRepos".into(),
            resolver_base_url: "https://public.api.bsky.app".into(),
            resolver_fixture: None,
            resolver_batch_limit: 25,
            resolver_rate_per_sec: 10,
            resolver_cache_capacity: 500_000,
            resolver_max_retries: 3,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            max_buckets: 10_000,
            score_file: None,
            mbfc_file: None,
            allsides_file: None,
            newsguard_orientation_file: None,
            ratings_reload_secs: 30,
            static_dir: None,
            seed: 42,
            retention_days: None,
        }
    }
}

impl Config {
    /// Defaults, then the file (if given), then the environment.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        Self::figment(path)?.extract().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn figment(path: Option<&Path>) -> Result<Figment, ConfigError> {
        let mut figment = Figment::from(Serialized::defaults(Config::default()));
        if let Some(path) = path {
            if !path.is_file() {
                return Err(ConfigError::Missing(path.to_path_buf()));
            }
            figment = figment.merge(Toml::file(path));
        }
        Ok(figment.merge(Env::prefixed(ENV_PREFIX)))
    }

    pub fn rating_files(&self) -> Option<RatingFiles> {
        Some(RatingFiles {
            scores: self.score_file.clone()?,
            mbfc: self.mbfc_file.clone(),
            allsides: self.allsides_file.clone(),
            newsguard: self.newsguard_orientation_file.clone(),
        })
    }

    /// The configured ratings, or an empty table when no score file is set.
    pub fn load_ratings(&self) -> Result<RatingTable, RatingsError> {
        match self.rating_files() {
            Some(files) => load_ratings(&files),
            None => Ok(RatingTable::empty()),
        }
    }

    pub fn resolver(&self) -> ResolverConfig {
        ResolverConfig {
            batch_limit: self.resolver_batch_limit,
            cache_capacity: self.resolver_cache_capacity,
            rate_per_sec: self.resolver_rate_per_sec,
            max_retries: self.resolver_max_retries,
            ..ResolverConfig::default()
        }
    }

    pub fn ingest(&self) -> IngestConfig {
        IngestConfig { queue_capacity: self.queue_capacity, ..IngestConfig::default() }
    }

    pub fn ratings_reload_interval(&self) -> Option<Duration> {
        (self.ratings_reload_secs > 0).then(|| Duration::from_secs(self.ratings_reload_secs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env_override() {
        figment::Jail::expect_with(|jail| {
            jail.create_file("newsky.toml", "bind = \"127.0.0.1:9999\"\nmax_buckets = 5\n")?;
            jail.set_env("NEWSKY_MAX_BUCKETS", "7");
            let config = Config::load(Some(Path::new("newsky.toml"))).expect("loads");
            assert_eq!(config.bind, "127.0.0.1:9999");
            assert_eq!(config.max_buckets, 7);
            assert_eq!(config.resolver_batch_limit, 25);
            Ok(())
        });
    }

    #[test]
    fn unknown_keys_and_missing_files_are_errors() {
        figment::Jail::expect_with(|jail| {
            jail.create_file("bad.toml", "no_such_key = 1\n")?;
            assert!(matches!(Config::load(Some(Path::new("bad.toml"))), Err(ConfigError::Invalid(_))));
            assert!(matches!(Config::load(Some(Path::new("absent.toml"))), Err(ConfigError::Missing(_))));
            Ok(())
        });
    }
}
