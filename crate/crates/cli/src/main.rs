use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "newsky",
    version,
    about = "Track how much of the news shared on Bluesky comes from unreliable sources"
)]
struct Cli {
    /// TOML config file; every key can also be set as NEWSKY_<KEY>.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Consume a live relay or a replay file into the store.
    Ingest {
        /// `live:<wss url>`, `live` for the configured endpoint, or `replay:<path>`.
        #[arg(long)]
        source: String,
        /// Start after this cursor instead of the store's last committed one.
        #[arg(long)]
        resume_cursor: Option<u64>,
    },
    /// Run an analytics job and write its outputs.
    Analyze {
        #[command(subcommand)]
        job: AnalyzeJob,
    },
    /// Serve the HTTP API.
    Serve,
    /// Export stored series.
    Export {
        #[command(subcommand)]
        what: ExportCommand,
    },
    /// Inspect rating files.
    Ratings {
        #[command(subcommand)]
        action: RatingsCommand,
    },
    /// Synthetic corpora for testing and demos.
    Fixture {
        #[command(subcommand)]
        action: FixtureCommand,
    },
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Window start (RFC 3339); omit both bounds for everything stored.
    #[arg(long, requires = "to")]
    from: Option<String>,
    #[arg(long, requires = "from")]
    to: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum AnalyzeJob {
    /// Hashtag co-occurrence graph as edge and node CSVs.
    HashtagGraph {
        #[command(flatten)]
        window: WindowArgs,
        /// Keep only the k-core; 0 keeps the whole graph.
        #[arg(long, default_value_t = 0)]
        k: usize,
        /// Class of posts mixing reliable and unreliable links.
        #[arg(long, default_value = "unreliable")]
        mixed: String,
        #[arg(long, default_value_t = 1)]
        min_cooccurrence: u64,
    },
    /// Engagement communities and their distinctive words.
    Audiences {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        top_words: usize,
        /// Use the conventional `- a_w` denominator instead of the printed `+ a_w`.
        #[arg(long)]
        conventional_log_odds: bool,
        /// Build the graph from all likes and reposts, not just news posts.
        #[arg(long)]
        all_engagements: bool,
    },
    /// Domains ranked by share count.
    Rankfreq {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value = "all")]
        class: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Orientation shares per reliability class.
    Orientation {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        lang: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum ExportCommand {
    /// Absolute prevalence buckets as CSV.
    Prevalence {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value = "hour")]
        granularity: String,
        #[arg(long, default_value = "post,repost,like")]
        kinds: String,
        #[arg(long, default_value = "per_link")]
        dedup: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum RatingsCommand {
    /// Load the configured rating files and report what was found.
    Check,
}

#[derive(Debug, Subcommand)]
enum FixtureCommand {
    /// Write a deterministic replay corpus with matching rating files.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        events: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt().json().with_writer(std::io::stderr).with_env_filter(filter).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(3);
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = %e, "command failed");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

async fn run(cli: Cli) -> Result<(), CliError> {
    let config =
        newsky_core::config::Config::load(cli.config.as_deref()).map_err(|e| CliError::Input(e.to_string()))?;
    match cli.command {
        Command::Ingest { source, resume_cursor } => commands::ingest(&config, &source, resume_cursor).await,
        Command::Analyze { job } => match job {
            AnalyzeJob::HashtagGraph { window, k, mixed, min_cooccurrence } => {
                commands::hashtag_graph(&config, &window.into(), k, &mixed, min_cooccurrence)
            }
            AnalyzeJob::Audiences { window, seed, top_words, conventional_log_odds, all_engagements } => {
                commands::audiences(&config, &window.into(), seed, top_words, conventional_log_odds, all_engagements)
            }
            AnalyzeJob::Rankfreq { window, class, limit } => commands::rankfreq(&config, &window.into(), &class, limit),
            AnalyzeJob::Orientation { window, lang } => commands::orientation(&config, &window.into(), lang.as_deref()),
        },
        Command::Serve => commands::serve(&config).await,
        Command::Export { what: ExportCommand::Prevalence { from, to, granularity, kinds, dedup, out } } => {
            commands::export_prevalence(&config, &from, &to, &granularity, &kinds, &dedup, out.as_deref())
        }
        Command::Ratings { action: RatingsCommand::Check } => commands::ratings_check(&config),
        Command::Fixture { action: FixtureCommand::Generate { out, events, seed } } => {
            commands::fixture_generate(&out, events, seed)
        }
    }
}

impl From<WindowArgs> for commands::OutWindow {
    fn from(w: WindowArgs) -> Self {
        commands::OutWindow { from: w.from, to: w.to, out: w.out }
    }
}
