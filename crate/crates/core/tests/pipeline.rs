use chrono::Duration;
use newsky_core::fixture::{single_link_posts, Corpus, CorpusSpec};
use newsky_core::ingest::{connect, IngestConfig, StreamSource};
use newsky_core::pipeline::{Pipeline, PipelineConfig, PipelineSummary};
use newsky_core::ratings::{load_ratings, RatingTable, Reliability, SourceRating};
use newsky_core::resolver::{FixturePostFetcher, Resolver, ResolverConfig};
use newsky_core::store::{Dedup, Granularity, KindSet, Store};
use newsky_core::timefmt::{self, TimeRange, Window};
use std::path::Path;
use std::sync::Arc;

fn resolver(corpus: &Corpus) -> Arc<Resolver<FixturePostFetcher>> {
    let config = ResolverConfig { rate_per_sec: 10_000, ..ResolverConfig::default() };
    Arc::new(Resolver::new(FixturePostFetcher::new(corpus.posts.iter().cloned()), config))
}

async fn ingest(
    store: Arc<Store>,
    corpus: &Corpus,
    events: &Path,
    resume: Option<u64>,
    shutdown: impl std::future::Future<Output = ()>,
) -> PipelineSummary {
    let handle = connect(
        StreamSource::ReplayFile { path: events.to_path_buf(), resume_cursor: resume },
        IngestConfig::default(),
    );
    let config = PipelineConfig { chunk_size: 200, ..PipelineConfig::default() };
    Pipeline::new(store, resolver(corpus), config).run(handle, shutdown).await.unwrap()
}

fn corpus() -> Corpus {
    Corpus::generate(&CorpusSpec { events: 2_000, ..CorpusSpec::default() })
}

fn prevalence_json(store: &Store, corpus: &Corpus, ratings: &RatingTable) -> String {
    let from = corpus.spec.start;
    let range = TimeRange::new(from, from + Duration::seconds(corpus.spec.span_secs + 3600)).unwrap();
    let buckets =
        store.query_absolute(range, Granularity::Hour, Dedup::PerLink, KindSet::ALL, ratings, 10_000).unwrap();
    serde_json::to_string(&buckets).unwrap()
}

#[tokio::test]
async fn two_runs_store_identical_results() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    let paths = corpus.write_to(dir.path()).unwrap();
    let ratings = load_ratings(&paths.rating_files()).unwrap();
    let mut bodies = Vec::new();
    for run in 0..2 {
        let store = Arc::new(Store::open(dir.path().join(format!("run{run}.db"))).unwrap());
        let summary = ingest(store.clone(), &corpus, &paths.events, None, std::future::pending()).await;
        assert_eq!(summary.last_cursor, Some(corpus.summary.last_cursor));
        assert!(summary.observations > 0);
        bodies.push(prevalence_json(&store, &corpus, &ratings));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert!(bodies[0].contains("\"reliable\""));
}

#[tokio::test]
async fn interrupted_run_resumes_to_the_same_totals() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    let paths = corpus.write_to(dir.path()).unwrap();
    let ratings = load_ratings(&paths.rating_files()).unwrap();

    let whole = Arc::new(Store::open(dir.path().join("whole.db")).unwrap());
    ingest(whole.clone(), &corpus, &paths.events, None, std::future::pending()).await;

    let split = Arc::new(Store::open(dir.path().join("split.db")).unwrap());
    let stopped = ingest(split.clone(), &corpus, &paths.events, None, async {}).await;
    assert!(stopped.interrupted);
    // the first half arrives, then the process dies
    let half = dir.path().join("half.jsonl");
    std::fs::write(&half, corpus.lines[..1000].join("\n") + "\n").unwrap();
    let first = ingest(split.clone(), &corpus, &half, None, std::future::pending()).await;
    let resume = split.last_cursor().unwrap();
    assert_eq!(first.last_cursor, resume);
    assert!(resume.is_some_and(|c| c < corpus.summary.last_cursor));
    ingest(split.clone(), &corpus, &paths.events, resume, std::future::pending()).await;

    assert_eq!(prevalence_json(&whole, &corpus, &ratings), prevalence_json(&split, &corpus, &ratings));
    assert_eq!(whole.engagements(Window::All).unwrap(), split.engagements(Window::All).unwrap());
}

#[tokio::test]
async fn corrupted_lines_only_lose_their_own_events() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    let paths = corpus.write_to(dir.path()).unwrap();
    let broken_at = [10usize, 500, 1500];

    let mut corrupted = Vec::new();
    let mut removed = Vec::new();
    for (i, line) in corpus.lines.iter().enumerate() {
        if broken_at.contains(&i) {
            corrupted.push(line[..line.len() / 2].to_string());
        } else {
            corrupted.push(line.clone());
            removed.push(line.clone());
        }
    }
    let corrupted_path = dir.path().join("corrupted.jsonl");
    let removed_path = dir.path().join("removed.jsonl");
    std::fs::write(&corrupted_path, corrupted.join("\n") + "\n").unwrap();
    std::fs::write(&removed_path, removed.join("\n") + "\n").unwrap();

    let a = Arc::new(Store::open(dir.path().join("a.db")).unwrap());
    let b = Arc::new(Store::open(dir.path().join("b.db")).unwrap());
    let sa = ingest(a.clone(), &corpus, &corrupted_path, None, std::future::pending()).await;
    let sb = ingest(b.clone(), &corpus, &removed_path, None, std::future::pending()).await;

    let clean = ingest(
        Arc::new(Store::open(dir.path().join("c.db")).unwrap()),
        &corpus,
        &paths.events,
        None,
        std::future::pending(),
    )
    .await;
    let lost = broken_at.iter().filter(|&&i| !corpus.lines[i].contains("\"kind\":\"other\"")).count() as u64;
    assert_eq!(sa.events, clean.events - lost);
    assert_eq!(sa.ingest.decode_errors, 3);
    assert_eq!(a.status().unwrap().decode_errors, 3);
    assert_eq!(b.status().unwrap().decode_errors, 0);
    assert_eq!(sa.events, sb.events);
    assert_eq!(sa.observations, sb.observations);
    let counts = |s: &Store| s.domain_counts(Window::All, KindSet::ALL, Dedup::PerLink).unwrap();
    assert_eq!(counts(&a), counts(&b));
    assert_eq!(a.engagements(Window::All).unwrap(), b.engagements(Window::All).unwrap());
}

#[tokio::test]
async fn two_percent_fixture_gives_exact_daily_ratio() {
    let start = timefmt::parse("2024-07-01T00:00:00Z").unwrap();
    let lines = single_link_posts(start, 5, &[("reliable.example", 98), ("unreliable.example", 2)]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let store = Arc::new(Store::open(dir.path().join("two.db")).unwrap());
    let empty = Corpus { posts: Vec::new(), ..corpus() };
    ingest(store.clone(), &empty, &path, None, std::future::pending()).await;

    let ratings =
        RatingTable::from_ratings([("reliable.example", 90.0), ("unreliable.example", 20.0)].map(|(d, s)| {
            SourceRating { score: Some(s), reliability: Reliability::from_score(Some(s)), ..SourceRating::unrated(d) }
        }));
    let range = TimeRange::new(start, start + Duration::days(5)).unwrap();
    let points = store.query_relative(range, Granularity::Day, Dedup::PerLink, KindSet::ALL, &ratings, 100).unwrap();
    assert_eq!(points.len(), 5);
    for p in points {
        assert_eq!(p.ratio, Some(0.02));
    }
}
