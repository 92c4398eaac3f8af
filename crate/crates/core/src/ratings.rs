//! Source ratings: reliability scores plus political orientation merged from
//! up to three vendor files.
//!
//! Score files are `domain,score[,lang]`; orientation files are
//! `domain,orientation`. Orientation labels are folded into five buckets by
//! [`Orientation::parse_label`]. When several vendors label the same domain,
//! the tier order MBFC > AllSides > NewsGuard decides, independent of the
//! order files are loaded or rows appear.

use arc_swap::ArcSwap;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime};
use thiserror::Error;

use crate::parser::normalize_domain;

/// Scores at or above this value are reliable.
pub const RELIABILITY_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reliability {
    Reliable,
    Unreliable,
    Unrated,
}

impl Reliability {
    pub fn from_score(score: Option<f64>) -> Self {
        match score {
            Some(s) if s >= RELIABILITY_THRESHOLD => Reliability::Reliable,
            Some(_) => Reliability::Unreliable,
            None => Reliability::Unrated,
        }
    }

    pub fn is_rated(self) -> bool {
        self != Reliability::Unrated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Reliability::Reliable => "reliable",
            Reliability::Unreliable => "unreliable",
            Reliability::Unrated => "unrated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Left,
    LeanLeft,
    Center,
    LeanRight,
    Right,
    Unknown,
}

impl Orientation {
    pub const BUCKETS: [Orientation; 5] =
        [Orientation::Left, Orientation::LeanLeft, Orientation::Center, Orientation::LeanRight, Orientation::Right];

    /// Map a vendor label onto the five buckets. Case, hyphens and
    /// underscores are ignored. Returns `None` for labels that do not
    /// describe a left/right position (e.g. "satire", "pro-science").
    pub fn parse_label(label: &str) -> Option<Orientation> {
        let folded = label.to_lowercase().replace(['-', '_'], " ").split_whitespace().collect::<Vec<_>>().join(" ");
        let folded = folded.strip_suffix(" bias").unwrap_or(&folded);
        let orientation = match folded {
            "left" | "far left" | "extreme left" | "left wing" | "liberal" => Orientation::Left,
            "lean left" | "leans left" | "left center" | "center left" | "left leaning" | "left of center"
            | "slightly left" => Orientation::LeanLeft,
            "center" | "centre" | "least biased" | "neutral" | "balanced" => Orientation::Center,
            "lean right" | "leans right" | "right center" | "center right" | "right leaning" | "right of center"
            | "slightly right" => Orientation::LeanRight,
            "right" | "far right" | "extreme right" | "right wing" | "conservative" => Orientation::Right,
            _ => return None,
        };
        Some(orientation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Left => "left",
            Orientation::LeanLeft => "lean_left",
            Orientation::Center => "center",
            Orientation::LeanRight => "lean_right",
            Orientation::Right => "right",
            Orientation::Unknown => "unknown",
        }
    }
}

/// Where a rating's orientation came from, in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationSource {
    Mbfc,
    AllSides,
    NewsGuardTier,
    None,
}

impl OrientationSource {
    pub const TIERS: [OrientationSource; 3] =
        [OrientationSource::Mbfc, OrientationSource::AllSides, OrientationSource::NewsGuardTier];
}

impl fmt::Display for OrientationSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrientationSource::Mbfc => "mbfc",
            OrientationSource::AllSides => "allsides",
            OrientationSource::NewsGuardTier => "newsguard",
            OrientationSource::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRating {
    pub domain: String,
    pub score: Option<f64>,
    pub reliability: Reliability,
    pub orientation: Orientation,
    pub orientation_source: OrientationSource,
    pub lang: Option<String>,
}

impl SourceRating {
    pub fn unrated(domain: &str) -> Self {
        Self {
            domain: domain.to_string(),
            score: None,
            reliability: Reliability::Unrated,
            orientation: Orientation::Unknown,
            orientation_source: OrientationSource::None,
            lang: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RatingsError {
    #[error("{path}: cannot read: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad header, expected {expected}, found {found:?}")]
    Schema { path: PathBuf, expected: &'static str, found: Vec<String> },
    #[error("{path}:{line}: {message}")]
    InvalidRow { path: PathBuf, line: u64, message: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Non-fatal findings while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    DuplicateDomain { path: PathBuf, domain: String, line: u64 },
    UnknownLabel { path: PathBuf, domain: String, label: String },
    UnparseableDomain { path: PathBuf, value: String, line: u64 },
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadWarning::DuplicateDomain { path, domain, line } => {
                write!(f, "{}:{line}: duplicate domain {domain}, keeping this row", path.display())
            }
            LoadWarning::UnknownLabel { path, domain, label } => {
                write!(f, "{}: {domain}: orientation label {label:?} not recognised", path.display())
            }
            LoadWarning::UnparseableDomain { path, value, line } => {
                write!(f, "{}:{line}: cannot normalise domain {value:?}", path.display())
            }
        }
    }
}

/// Normalise a domain column value through the same path post URLs take.
fn rating_key(value: &str) -> Option<String> {
    let value = value.trim();
    if value.contains("://") {
        normalize_domain(value).ok()
    } else {
        normalize_domain(&format!("https://{value}")).ok()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, RatingsError> {
    let file = std::fs::File::open(path).map_err(|source| RatingsError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(file))
}

fn header(reader: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>, RatingsError> {
    let headers = reader.headers().map_err(|source| RatingsError::Csv { path: path.to_path_buf(), source })?;
    Ok(headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect())
}

#[derive(Debug, Clone)]
struct ScoreRow {
    score: Option<f64>,
    lang: Option<String>,
}

/// Collects files, then merges them. Orientation files may be added in
/// any order; precedence comes from the tier each file is registered as.
#[derive(Debug, Default)]
pub struct RatingTableBuilder {
    scores: BTreeMap<String, ScoreRow>,
    orientations: BTreeMap<OrientationSource, BTreeMap<String, Orientation>>,
    warnings: Vec<LoadWarning>,
}

impl RatingTableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scores(mut self, path: impl AsRef<Path>) -> Result<Self, RatingsError> {
        let path = path.as_ref();
        let mut reader = open_csv(path)?;
        let cols = header(&mut reader, path)?;
        let with_lang = match cols.as_slice() {
            [d, s] if d == "domain" && s == "score" => false,
            [d, s, l] if d == "domain" && s == "score" && l == "lang" => true,
            _ => {
                return Err(RatingsError::Schema {
                    path: path.to_path_buf(),
                    expected: "domain,score[,lang]",
                    found: cols,
                })
            }
        };
        for row in reader.records() {
            let row = row.map_err(|source| RatingsError::Csv { path: path.to_path_buf(), source })?;
            let line = row.position().map_or(0, |p| p.line());
            let Some(domain) = rating_key(&row[0]) else {
                self.warnings.push(LoadWarning::UnparseableDomain {
                    path: path.to_path_buf(),
                    value: row[0].to_string(),
                    line,
                });
                continue;
            };
            let score = match row[1].trim() {
                "" => None,
                s => {
                    let v: f64 = s.parse().map_err(|_| RatingsError::InvalidRow {
                        path: path.to_path_buf(),
                        line,
                        message: format!("score {s:?} is not a number"),
                    })?;
                    if !(0.0..=100.0).contains(&v) {
                        return Err(RatingsError::InvalidRow {
                            path: path.to_path_buf(),
                            line,
                            message: format!("score {v} outside [0, 100]"),
                        });
                    }
                    Some(v)
                }
            };
            let lang = with_lang.then(|| row[2].trim().to_ascii_lowercase()).filter(|l| !l.is_empty());
            if self.scores.insert(domain.clone(), ScoreRow { score, lang }).is_some() {
                self.warnings.push(LoadWarning::DuplicateDomain { path: path.to_path_buf(), domain, line });
            }
        }
        Ok(self)
    }

    pub fn orientations(mut self, tier: OrientationSource, path: impl AsRef<Path>) -> Result<Self, RatingsError> {
        assert!(tier != OrientationSource::None, "orientation files need a tier");
        let path = path.as_ref();
        let mut reader = open_csv(path)?;
        let cols = header(&mut reader, path)?;
        if cols != ["domain", "orientation"] {
            return Err(RatingsError::Schema { path: path.to_path_buf(), expected: "domain,orientation", found: cols });
        }
        let labels = self.orientations.entry(tier).or_default();
        for row in reader.records() {
            let row = row.map_err(|source| RatingsError::Csv { path: path.to_path_buf(), source })?;
            let line = row.position().map_or(0, |p| p.line());
            let Some(domain) = rating_key(&row[0]) else {
                self.warnings.push(LoadWarning::UnparseableDomain {
                    path: path.to_path_buf(),
                    value: row[0].to_string(),
                    line,
                });
                continue;
            };
            let Some(orientation) = Orientation::parse_label(&row[1]) else {
                self.warnings.push(LoadWarning::UnknownLabel {
                    path: path.to_path_buf(),
                    domain,
                    label: row[1].to_string(),
                });
                continue;
            };
            if labels.insert(domain.clone(), orientation).is_some() {
                self.warnings.push(LoadWarning::DuplicateDomain { path: path.to_path_buf(), domain, line });
            }
        }
        Ok(self)
    }

    pub fn build(self) -> RatingTable {
        let mut domains: Vec<&String> = self.scores.keys().collect();
        for labels in self.orientations.values() {
            domains.extend(labels.keys());
        }
        domains.sort();
        domains.dedup();

        let mut entries = HashMap::with_capacity(domains.len());
        for domain in domains {
            let (score, lang) = self.scores.get(domain).map(|r| (r.score, r.lang.clone())).unwrap_or((None, None));
            let (orientation, orientation_source) = OrientationSource::TIERS
                .iter()
                .find_map(|tier| self.orientations.get(tier)?.get(domain).map(|o| (*o, *tier)))
                .unwrap_or((Orientation::Unknown, OrientationSource::None));
            entries.insert(
                domain.clone(),
                SourceRating {
                    domain: domain.clone(),
                    score,
                    reliability: Reliability::from_score(score),
                    orientation,
                    orientation_source,
                    lang,
                },
            );
        }
        RatingTable { entries, warnings: self.warnings }
    }
}

/// Paths of the four rating inputs. Only the score file is mandatory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingFiles {
    pub scores: PathBuf,
    pub mbfc: Option<PathBuf>,
    pub allsides: Option<PathBuf>,
    pub newsguard: Option<PathBuf>,
}

impl RatingFiles {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        std::iter::once(&self.scores).chain(self.mbfc.iter()).chain(self.allsides.iter()).chain(self.newsguard.iter())
    }
}

pub fn load_ratings(files: &RatingFiles) -> Result<RatingTable, RatingsError> {
    let mut builder = RatingTableBuilder::new().scores(&files.scores)?;
    for (tier, path) in [
        (OrientationSource::Mbfc, &files.mbfc),
        (OrientationSource::AllSides, &files.allsides),
        (OrientationSource::NewsGuardTier, &files.newsguard),
    ] {
        if let Some(path) = path {
            builder = builder.orientations(tier, path)?;
        }
    }
    let table = builder.build();
    for warning in &table.warnings {
        tracing::warn!("{warning}");
    }
    Ok(table)
}

/// Immutable snapshot of merged ratings.
#[derive(Debug, Clone, Default)]
pub struct RatingTable {
    entries: HashMap<String, SourceRating>,
    warnings: Vec<LoadWarning>,
}

impl RatingTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_ratings(ratings: impl IntoIterator<Item = SourceRating>) -> Self {
        Self { entries: ratings.into_iter().map(|r| (r.domain.clone(), r)).collect(), warnings: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn warnings(&self) -> &[LoadWarning] {
        &self.warnings
    }

    /// Exact lookup, then parent domains (`a.b.example.com` → `b.example.com`
    /// → `example.com`). Misses are `Unrated` with `Unknown` orientation.
    pub fn classify(&self, domain: &str) -> SourceRating {
        let mut candidate = domain;
        loop {
            if let Some(rating) = self.entries.get(candidate) {
                return rating.clone();
            }
            match candidate.split_once('.') {
                Some((_, parent)) if parent.contains('.') => candidate = parent,
                _ => return SourceRating::unrated(domain),
            }
        }
    }

    pub fn reliability(&self, domain: &str) -> Reliability {
        self.classify(domain).reliability
    }

    pub fn iter(&self) -> impl Iterator<Item = &SourceRating> {
        self.entries.values()
    }
}

/// Atomically swappable ratings snapshot. Readers never block.
#[derive(Debug)]
pub struct RatingsHandle {
    current: ArcSwap<RatingTable>,
}

impl RatingsHandle {
    pub fn new(table: RatingTable) -> Self {
        Self { current: ArcSwap::from_pointee(table) }
    }

    pub fn snapshot(&self) -> Arc<RatingTable> {
        self.current.load_full()
    }

    pub fn replace(&self, table: RatingTable) {
        self.current.store(Arc::new(table));
    }

    pub fn reload(&self, files: &RatingFiles) -> Result<(), RatingsError> {
        let table = load_ratings(files)?;
        tracing::info!(domains = table.len(), "ratings reloaded");
        self.replace(table);
        Ok(())
    }

    /// Poll the rating files and reload when any modification time changes.
    /// A failed reload keeps the previous snapshot.
    pub fn watch(self: Arc<Self>, files: RatingFiles, every: Duration) -> tokio::task::JoinHandle<()> {
        tokio::spawn(async move {
            let stamp = |files: &RatingFiles| -> Vec<Option<SystemTime>> {
                files.paths().map(|p| std::fs::metadata(p).and_then(|m| m.modified()).ok()).collect()
            };
            let mut last = stamp(&files);
            let mut ticker = tokio::time::interval(every);
            ticker.tick().await;
            loop {
                ticker.tick().await;
                let now = stamp(&files);
                if now != last {
                    last = now;
                    if let Err(e) = self.reload(&files) {
                        tracing::warn!("ratings reload failed, keeping previous snapshot: {e}");
                    }
                }
            }
        })
    }
}
