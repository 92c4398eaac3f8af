use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

use newsky_core::analytics::lexicon::write_lexicon_csv;
use newsky_core::analytics::rankfreq::write_rankfreq_csv;
use newsky_core::analytics::{
    hashtag_graph_for_window, orientation_for_window, rank_frequency_for_window, run_audiences_job, AudienceConfig,
    LogOddsForm, LouvainConfig, MixedPolicy, RankClass,
};
use newsky_core::config::Config;
use newsky_core::fixture::{Corpus, CorpusSpec};
use newsky_core::ingest::StreamSource;
use newsky_core::pipeline::{Pipeline, PipelineConfig, PipelineError, PipelineSummary};
use newsky_core::ratings::{RatingTable, RatingsHandle};
use newsky_core::resolver::{FixturePostFetcher, HttpPostFetcher, PostFetcher, Resolver};
use newsky_core::store::{write_prevalence_csv, Dedup, Granularity, KindSet, Store, StoreError};
use newsky_core::timefmt::{self, TimeRange, Window};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, missing files, malformed configuration.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("summary serializes"));
}

fn load_ratings(config: &Config) -> Result<RatingTable, CliError> {
    config.load_ratings().map_err(|e| CliError::Input(e.to_string()))
}

fn open_reader(config: &Config) -> Result<Store, CliError> {
    Ok(Store::open_read_only(&config.store_path)?)
}

pub struct OutWindow {
    pub from: Option<String>,
    pub to: Option<String>,
    pub out: PathBuf,
}

impl OutWindow {
    fn window(&self) -> Result<Window, CliError> {
        match (&self.from, &self.to) {
            (Some(from), Some(to)) => {
                Window::parse(&format!("{from}/{to}")).map_err(|e| CliError::Input(e.to_string()))
            }
            _ => Ok(Window::All),
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        std::fs::create_dir_all(&self.out).map_err(io_error(&self.out))?;
        let path = self.out.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(io_error(&path))?))
    }
}

fn parse_arg<T: std::str::FromStr<Err = String>>(name: &str, raw: &str) -> Result<T, CliError> {
    raw.parse().map_err(|e| CliError::Input(format!("--{name}: {e}")))
}

pub async fn ingest(config: &Config, source: &str, resume: Option<u64>) -> Result<(), CliError> {
    let store = Arc::new(Store::open(&config.store_path)?);
    let resume = match resume {
        Some(c) => Some(c),
        None => store.last_cursor()?,
    };
    let source = if let Some(path) = source.strip_prefix("replay:") {
        let path = PathBuf::from(path);
        if !path.is_file() {
            return Err(CliError::Input(format!("replay file {} not found", path.display())));
        }
        StreamSource::ReplayFile { path, resume_cursor: resume }
    } else if source == "live" {
        StreamSource::LiveWebsocket { endpoint: config.live_endpoint.clone(), resume_cursor: resume }
    } else if let Some(url) = source.strip_prefix("live:") {
        StreamSource::LiveWebsocket { endpoint: url.to_string(), resume_cursor: resume }
    } else {
        return Err(CliError::Input(format!("--source must be live:<url> or replay:<path>, got {source:?}")));
    };
    tracing::info!(?source, "starting ingest");

    let summary = match &config.resolver_fixture {
        Some(path) => {
            let fetcher =
                FixturePostFetcher::load(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            run_pipeline(store.clone(), fetcher, config, source).await
        }
        None => run_pipeline(store.clone(), HttpPostFetcher::new(&config.resolver_base_url), config, source).await,
    }
    .map_err(|e| match e {
        PipelineError::Store(s) => CliError::from(s),
        PipelineError::Ingest(i) => CliError::Runtime(i.to_string()),
    })?;

    if let Some(days) = config.retention_days {
        let cutoff = chrono::Utc::now() - chrono::Duration::days(days as i64);
        let removed = store.purge_older_than(cutoff)?;
        tracing::info!(removed, "retention purge");
    }
    if summary.interrupted {
        eprintln!(
            "interrupted; resume with --resume-cursor {}",
            summary.last_cursor.map_or("none".into(), |c| c.to_string())
        );
    }
    print_json(&summary);
    Ok(())
}

async fn run_pipeline<F: PostFetcher>(
    store: Arc<Store>,
    fetcher: F,
    config: &Config,
    source: StreamSource,
) -> Result<PipelineSummary, PipelineError> {
    let resolver = Arc::new(Resolver::new(fetcher, config.resolver()));
    let handle = newsky_core::ingest::connect(source, config.ingest());
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("interrupt received, flushing");
    };
    Pipeline::new(store, resolver, PipelineConfig::default()).run(handle, shutdown).await
}

#[derive(Serialize)]
struct JobOutput {
    job: &'static str,
    window: String,
    files: Vec<PathBuf>,
    #[serde(flatten)]
    extra: serde_json::Value,
}

pub fn hashtag_graph(config: &Config, w: &OutWindow, k: usize, mixed: &str, min: u64) -> Result<(), CliError> {
    let window = w.window()?;
    let mixed: MixedPolicy = parse_arg("mixed", mixed)?;
    let ratings = load_ratings(config)?;
    let store = open_reader(config)?;
    let graph = if window.is_empty() {
        newsky_core::analytics::build_hashtag_graph(&[], &ratings, min, mixed)
    } else {
        hashtag_graph_for_window(&store, window, &ratings, min, mixed).map_err(|e| CliError::Runtime(e.to_string()))?
    };
    let k_max = graph.max_k_core().map_or(0, |(k, _)| k);
    let core = graph.k_core(k);
    core.write_edges_csv(w.create("edges.csv")?).map_err(|e| CliError::Runtime(e.to_string()))?;
    core.write_nodes_csv(w.create("nodes.csv")?).map_err(|e| CliError::Runtime(e.to_string()))?;
    print_json(&JobOutput {
        job: "hashtag-graph",
        window: window.to_string(),
        files: vec![w.out.join("edges.csv"), w.out.join("nodes.csv")],
        extra: serde_json::json!({ "k": k, "k_max": k_max, "nodes": core.nodes().len(), "edges": core.edges().len() }),
    });
    Ok(())
}

pub fn audiences(
    config: &Config,
    w: &OutWindow,
    seed: Option<u64>,
    top_words: usize,
    conventional: bool,
    all_engagements: bool,
) -> Result<(), CliError> {
    let window = w.window()?;
    let job = AudienceConfig {
        louvain: LouvainConfig { seed: seed.unwrap_or(config.seed), ..LouvainConfig::default() },
        news_only: !all_engagements,
        terms_per_community: top_words,
        form: if conventional { LogOddsForm::Conventional } else { LogOddsForm::AsPrinted },
    };
    // the report is stored for the API, so this needs the writer lock
    let store = Store::open(&config.store_path).map_err(|e| match e {
        StoreError::Locked(p) => {
            CliError::Runtime(format!("store {} is held by a running ingest; stop it first", p.display()))
        }
        other => other.into(),
    })?;
    let report = run_audiences_job(&store, window, &job)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let mut out = w.create("audiences.json")?;
    out.write_all(json.as_bytes()).and_then(|_| out.flush()).map_err(io_error(&w.out))?;
    let rows: Vec<(usize, &[_])> = report.communities.iter().map(|c| (c.id, c.terms.as_slice())).collect();
    write_lexicon_csv(rows, w.create("lexicon.csv")?).map_err(|e| CliError::Runtime(e.to_string()))?;
    print_json(&JobOutput {
        job: "audiences",
        window: window.to_string(),
        files: vec![w.out.join("audiences.json"), w.out.join("lexicon.csv")],
        extra: serde_json::json!({
            "k_max": report.k_max,
            "core_nodes": report.core_nodes,
            "communities": report.communities.len(),
            "modularity": report.modularity,
        }),
    });
    Ok(())
}

pub fn rankfreq(config: &Config, w: &OutWindow, class: &str, limit: Option<usize>) -> Result<(), CliError> {
    let window = w.window()?;
    let class: RankClass = parse_arg("class", class)?;
    let ratings = load_ratings(config)?;
    let store = open_reader(config)?;
    let rows = rank_frequency_for_window(&store, window, &ratings, class, limit)?;
    write_rankfreq_csv(&rows, w.create("rankfreq.csv")?).map_err(|e| CliError::Runtime(e.to_string()))?;
    print_json(&JobOutput {
        job: "rankfreq",
        window: window.to_string(),
        files: vec![w.out.join("rankfreq.csv")],
        extra: serde_json::json!({ "rows": rows.len() }),
    });
    Ok(())
}

pub fn orientation(config: &Config, w: &OutWindow, lang: Option<&str>) -> Result<(), CliError> {
    let window = w.window()?;
    let ratings = load_ratings(config)?;
    let store = open_reader(config)?;
    let table = orientation_for_window(&store, window, &ratings, lang)?;
    let mut out = w.create("orientation.json")?;
    let json = serde_json::to_string_pretty(&table).expect("table serializes");
    out.write_all(json.as_bytes()).and_then(|_| out.flush()).map_err(io_error(&w.out))?;
    print_json(&JobOutput {
        job: "orientation",
        window: window.to_string(),
        files: vec![w.out.join("orientation.json")],
        extra: serde_json::json!({ "rows": table.rows.len() }),
    });
    Ok(())
}

pub async fn serve(config: &Config) -> Result<(), CliError> {
    let store = Arc::new(open_reader(config)?);
    let ratings = Arc::new(RatingsHandle::new(load_ratings(config)?));
    if let (Some(files), Some(every)) = (config.rating_files(), config.ratings_reload_interval()) {
        ratings.clone().watch(files, every);
    }
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|e| CliError::Runtime(format!("cannot bind {}: {e}", config.bind)))?;
    let addr = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    tracing::info!(%addr, "serving");
    eprintln!("listening on http://{addr}");
    let app =
        newsky_api::router(newsky_api::AppState::new(store, ratings, config.max_buckets), config.static_dir.clone());
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    newsky_api::serve(listener, app, shutdown).await.map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn export_prevalence(
    config: &Config,
    from: &str,
    to: &str,
    granularity: &str,
    kinds: &str,
    dedup: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let time = |name: &str, raw: &str| {
        timefmt::parse(raw).map_err(|_| CliError::Input(format!("--{name}: not an RFC 3339 time: {raw}")))
    };
    let range = TimeRange::new(time("from", from)?, time("to", to)?).map_err(|e| CliError::Input(e.to_string()))?;
    let granularity: Granularity = parse_arg("granularity", granularity)?;
    let kinds: KindSet = parse_arg("kinds", kinds)?;
    let dedup: Dedup = parse_arg("dedup", dedup)?;
    let ratings = load_ratings(config)?;
    let store = open_reader(config)?;
    let buckets =
        store.query_absolute(range, granularity, dedup, kinds, &ratings, config.max_buckets).map_err(|e| match e {
            StoreError::RangeTooLarge { .. } => CliError::Input(e.to_string()),
            other => other.into(),
        })?;
    let result = match out {
        Some(path) => write_prevalence_csv(&buckets, File::create(path).map_err(io_error(path))?),
        None => write_prevalence_csv(&buckets, std::io::stdout().lock()),
    };
    result.map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct RatingsReport {
    domains: usize,
    reliable: usize,
    unreliable: usize,
    with_orientation: usize,
    warnings: Vec<String>,
}

pub fn ratings_check(config: &Config) -> Result<(), CliError> {
    if config.rating_files().is_none() {
        return Err(CliError::Input("no score_file configured".into()));
    }
    let table = load_ratings(config)?;
    let count = |f: &dyn Fn(&newsky_core::ratings::SourceRating) -> bool| table.iter().filter(|r| f(r)).count();
    print_json(&RatingsReport {
        domains: table.len(),
        reliable: count(&|r| r.reliability == newsky_core::ratings::Reliability::Reliable),
        unreliable: count(&|r| r.reliability == newsky_core::ratings::Reliability::Unreliable),
        with_orientation: count(&|r| r.orientation != newsky_core::ratings::Orientation::Unknown),
        warnings: table.warnings().iter().map(ToString::to_string).collect(),
    });
    Ok(())
}

pub fn fixture_generate(out: &Path, events: usize, seed: Option<u64>) -> Result<(), CliError> {
    let defaults = CorpusSpec::default();
    let spec = CorpusSpec { events, seed: seed.unwrap_or(defaults.seed), ..defaults };
    let corpus = Corpus::generate(&spec);
    let paths = corpus.write_to(out).map_err(io_error(out))?;
    newsky_core::fixture::write_golden_frames(out).map_err(io_error(out))?;
    print_json(&serde_json::json!({
        "events": paths.events,
        "posts": paths.posts,
        "scores": paths.scores,
        "summary": corpus.summary,
    }));
    Ok(())
}
