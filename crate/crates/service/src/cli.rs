//! Command-line interface of the `qir` binary.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qir_core::corpus::{Corpus, CorpusError, IngestConfig};
use qir_core::qprob::DEFAULT_DENSE_BOUND;
use qir_core::session::{parse_log, render_log, QueryMode};
use qir_core::{Engine, SessionConfig};

use crate::api::{router, AppState};
use crate::config::SessionOverrides;
use crate::replay;
use crate::store::Journal;

/// Environment variable that takes precedence over `--index`.
pub const INDEX_ENV: &str = "QIR_INDEX";

#[derive(Debug, Parser)]
#[command(
    name = "qir",
    version,
    about = "Interactive retrieval with a density-operator user model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a JSONL corpus and write an index file.
    Index(IndexArgs),
    /// Replay a session log against an index.
    Replay(ReplayArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// JSONL corpus, one {"doc_id", "title", "paragraphs"} object per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Minimum number of documents a term must occur in.
    #[arg(long, default_value_t = 1)]
    pub min_df: usize,
}

/// Session settings; unset flags keep the engine defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub alpha_click: Option<f64>,
    #[arg(long)]
    pub alpha_judgment: Option<f64>,
    /// Turns queries into alpha updates instead of hard conditioning.
    #[arg(long)]
    pub alpha_query: Option<f64>,
    /// Drift threshold.
    #[arg(long)]
    pub tau: Option<f64>,
    /// prf or term_union.
    #[arg(long)]
    pub query_mode: Option<QueryMode>,
    #[arg(long)]
    pub prf_k: Option<usize>,
    /// Free-text user context the session starts conditioned on.
    #[arg(long)]
    pub context: Option<String>,
}

impl ModelArgs {
    pub fn overrides(&self) -> SessionOverrides {
        SessionOverrides {
            alpha_click: self.alpha_click,
            alpha_judgment: self.alpha_judgment,
            alpha_query: self.alpha_query,
            tau: self.tau,
            query_mode: self.query_mode,
            prf_k: self.prf_k,
            context: self.context.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Session log (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Enriched log with fresh diagnostics.
    #[arg(long)]
    pub output: PathBuf,
    /// Final ranking JSON; printed to standard output when omitted.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Final ensemble JSON.
    #[arg(long)]
    pub final_state: Option<PathBuf>,
    /// Rank trajectories for alpha 0, the configured alphas, and alpha 1.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Number of documents in rankings.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Directory for per-session JSONL journals.
    #[arg(long)]
    pub journal_dir: Option<PathBuf>,
    /// Seconds of inactivity before a session is evicted from memory.
    #[arg(long, default_value_t = 3600)]
    pub idle_timeout: u64,
    /// Largest dimension for which /state includes the dense operator.
    #[arg(long, default_value_t = DEFAULT_DENSE_BOUND)]
    pub max_dense_dim: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// `QIR_INDEX` if set, else the `--index` flag.
pub fn index_path(flag: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = std::env::var_os(INDEX_ENV).filter(|v| !v.is_empty()) {
        return Ok(PathBuf::from(p));
    }
    flag.map(Path::to_path_buf)
        .context("no index given: pass --index or set QIR_INDEX")
}

pub fn load_engine(path: &Path) -> Result<Engine> {
    let corpus = Corpus::load(path).with_context(|| format!("loading index {}", path.display()))?;
    Ok(Engine::new(Arc::new(corpus))?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(args) => index(args),
        Command::Replay(args) => replay_cmd(args),
        Command::Serve(args) => serve(args),
    }
}

fn index(args: IndexArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let raw = Corpus::parse_jsonl(&text)?;
    let config = IngestConfig {
        min_df: args.min_df,
        ..IngestConfig::default()
    };
    let corpus = match Corpus::ingest(&raw, &config) {
        Ok(c) => c,
        Err(CorpusError::Ingestion {
            message,
            report: Some(report),
        }) => {
            print_json(&report)?;
            bail!("ingestion failed: {message}");
        }
        Err(e) => return Err(e.into()),
    };
    corpus.save(&args.output)?;
    print_json(corpus.report())?;
    Ok(())
}

/// Prints to standard output; a closed pipe is not an error.
fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn replay_cmd(args: ReplayArgs) -> Result<()> {
    if args.top == 0 {
        bail!("--top must be at least 1");
    }
    let engine = load_engine(&index_path(args.index.as_deref())?)?;
    let config = args
        .model
        .overrides()
        .resolve(&engine, &SessionConfig::default())?;
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let lines = parse_log(&text)?;

    let out = replay::run(&engine, config.clone(), &lines, args.top)?;
    fs::write(&args.output, render_log(&out.enriched))
        .with_context(|| format!("writing {}", args.output.display()))?;
    match &args.ranking {
        Some(p) => write_json(p, &out.ranking)?,
        None => print_json(&out.ranking)?,
    }
    if let Some(p) = &args.final_state {
        write_json(p, &out.state.rho)?;
    }
    if let Some(p) = &args.compare {
        write_json(p, &replay::compare(&engine, &config, &lines, args.top)?)?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    if args.model.context.is_some() {
        bail!("--context applies to replay only; pass context per session in POST /sessions");
    }
    let engine = load_engine(&index_path(args.index.as_deref())?)?;
    let defaults = args
        .model
        .overrides()
        .resolve(&engine, &SessionConfig::default())?;
    let mut app = AppState::new(Arc::new(engine), defaults);
    app.max_dense_dim = args.max_dense_dim;
    if let Some(dir) = &args.journal_dir {
        app.journal =
            Some(Journal::open(dir).with_context(|| format!("opening journal {}", dir.display()))?);
    }
    let idle = Duration::from_secs(args.idle_timeout.max(1));

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let store = app.store.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(
                (idle / 4).clamp(Duration::from_secs(1), Duration::from_secs(60)),
            );
            loop {
                tick.tick().await;
                store.evict_idle(idle);
            }
        });
        let listener = tokio::net::TcpListener::bind(args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(app))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
