//! `solembed` command line.
//!
//! Reports go to stdout as JSON, a one-line summary goes to stderr. Exit
//! codes: 0 success, 1 usage error, 2 analysis-blocking error.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use solembed::detectors::{
    detect_corpus_bugs, detect_corpus_clones, validate_bytes, BugHit, DEFAULT_TOP_K,
};
use solembed::embedding::Hyperparams;
use solembed::frontend::{parse_text, SourceId, SourceUnit};
use solembed::ingestion::{build_store, update_model, FsProvider, DEFAULT_RETRAIN_ADVISORY};
use solembed::normalizer::{extract_fragments, Granularity};
use solembed::similarity::{check_threshold, MatrixCache, Thresholds};
use solembed::store::{BugCatalog, CorpusStore, Snapshot};

use crate::api::{self, AppState, ServiceConfig, StatsResponse};
use crate::bench::{self, BenchConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_BLOCKED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "solembed",
    version,
    about = "Solidity clone and clone-related bug detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train token embeddings on a corpus and write a new store
    Train {
        corpus_dir: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "*.sol")]
        pattern: String,
        /// Bug catalog JSON; the built-in catalog when omitted
        #[arg(long)]
        bugs: Option<PathBuf>,
        #[command(flatten)]
        hp: HyperparamArgs,
    },
    /// Add new sources to a store with its frozen embedding table
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "*.sol")]
        pattern: String,
        #[arg(long, default_value_t = DEFAULT_RETRAIN_ADVISORY, value_parser = parse_unit)]
        retrain_advisory: f64,
    },
    /// Report clone pairs inside the corpus
    Clones {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "contract")]
        granularity: Granularity,
        #[arg(long, default_value_t = 0.95, value_parser = parse_threshold)]
        threshold: f64,
    },
    /// Report corpus statements matching the bug database
    Bugs {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 0.90, value_parser = parse_threshold)]
        threshold: f64,
    },
    /// Check one contract against the corpus and the bug database
    Validate {
        file: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = api::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        #[arg(long, default_value_t = api::DEFAULT_MAX_SOURCE_BYTES)]
        max_source_bytes: usize,
        #[command(flatten)]
        query: QueryArgs,
    },
    /// Time the scalar loop against the matrix kernel, as CSV
    Bench {
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        dim: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        queries: u64,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        repeats: u64,
        #[arg(long, default_value_t = 0.9, value_parser = parse_threshold)]
        threshold: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print store counts, version, dimension and thresholds
    Stats {
        #[arg(long)]
        store: PathBuf,
    },
    /// Dump the AST or fragment token streams of one file
    Parse {
        file: PathBuf,
        #[arg(long, conflicts_with = "emit_stream")]
        emit_ast: bool,
        #[arg(long, value_name = "GRANULARITY")]
        emit_stream: Option<Granularity>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct HyperparamArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub negatives: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 0.025, value_parser = parse_positive)]
    pub lr: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl HyperparamArgs {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            dim: self.dim as usize,
            window: self.window as usize,
            negatives: self.negatives as usize,
            epochs: self.epochs as usize,
            initial_lr: self.lr,
            min_count: self.min_count,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[arg(long, default_value_t = 0.95, value_parser = parse_threshold)]
    pub clone_threshold: f64,
    #[arg(long, default_value_t = 0.90, value_parser = parse_threshold)]
    pub bug_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_TOP_K as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub top_k: u64,
}

impl QueryArgs {
    fn thresholds(&self) -> Thresholds {
        Thresholds {
            clone_threshold: self.clone_threshold,
            bug_threshold: self.bug_threshold,
        }
    }
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    check_threshold(t).map_err(|e| e.to_string())
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("{t} is outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(format!("{t} must be a positive number"))
    }
}

/// Failure that stops a command.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Blocked(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Blocked(_) => EXIT_BLOCKED,
        }
    }
}

impl From<solembed::Error> for Failure {
    fn from(e: solembed::Error) -> Self {
        match e {
            solembed::Error::InvalidThreshold(_) | solembed::Error::InvalidHyperparams(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Blocked(e.to_string()),
        }
    }
}

fn blocked(e: impl std::fmt::Display) -> Failure {
    Failure::Blocked(e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Blocked(m)) = &f;
            eprintln!("error: {m}");
            f.code()
        }
    }
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(blocked)?;
    writeln!(out).map_err(blocked)
}

fn load_store(dir: &Path) -> Result<Snapshot, Failure> {
    Ok(Snapshot::load(dir)?)
}

#[derive(Serialize)]
struct BugReport {
    corpus_version: u64,
    bug_threshold: f64,
    hits: Vec<BugHit>,
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train {
            corpus_dir,
            store,
            pattern,
            bugs,
            hp,
        } => {
            if !corpus_dir.is_dir() {
                return Err(blocked(format!(
                    "{} is not a directory",
                    corpus_dir.display()
                )));
            }
            let provider = FsProvider::with_pattern(&corpus_dir, &pattern)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let catalog = match bugs {
                Some(p) => BugCatalog::read(&p)?,
                None => BugCatalog::builtin(),
            };
            let records = catalog.compile()?;
            let (built, summary) = build_store(
                &provider,
                &hp.hyperparams(),
                catalog.categories.clone(),
                records,
            )?;
            built.snapshot().save(&store)?;
            emit(&summary)?;
            eprintln!(
                "trained: {} sources, {} duplicates, {} failed, vocabulary {}, d={}, {} bugs; saved to {}",
                summary.delta.added,
                summary.delta.skipped_duplicates,
                summary.delta.failed.len(),
                summary.vocabulary,
                summary.dim,
                summary.bugs_added,
                store.display()
            );
        }
        Command::Ingest {
            dir,
            store,
            pattern,
            retrain_advisory,
        } => {
            if !dir.is_dir() {
                return Err(blocked(format!("{} is not a directory", dir.display())));
            }
            let provider = FsProvider::with_pattern(&dir, &pattern)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let corpus = CorpusStore::from_snapshot(load_store(&store)?);
            let update = update_model(&provider, &corpus, retrain_advisory)?;
            if update.delta.added > 0 {
                corpus.snapshot().save(&store)?;
            }
            emit(&update)?;
            eprintln!(
                "ingested: {} added, {} duplicates, {} failed, oov rate {:.4}{}, version {}",
                update.delta.added,
                update.delta.skipped_duplicates,
                update.delta.failed.len(),
                update.oov_rate,
                if update.retrain_advised {
                    " (retrain advised)"
                } else {
                    ""
                },
                update.delta.new_version
            );
        }
        Command::Clones {
            store,
            granularity,
            threshold,
        } => {
            let snapshot = load_store(&store)?;
            let report =
                detect_corpus_clones(&snapshot, &MatrixCache::new(), granularity, threshold)?;
            emit(&report)?;
            eprintln!(
                "{} clone pairs in {} clusters at {granularity} level, clone ratio {:.3}",
                report.pairs.len(),
                report.clusters.len(),
                report.clone_ratio
            );
        }
        Command::Bugs { store, threshold } => {
            let snapshot = load_store(&store)?;
            let hits = detect_corpus_bugs(&snapshot, &MatrixCache::new(), threshold)?;
            eprintln!("{} bug hits at threshold {threshold}", hits.len());
            emit(&BugReport {
                corpus_version: snapshot.version(),
                bug_threshold: threshold,
                hits,
            })?;
        }
        Command::Validate { file, store, query } => {
            let bytes =
                std::fs::read(&file).map_err(|e| blocked(format!("{}: {e}", file.display())))?;
            let snapshot = load_store(&store)?;
            let report = validate_bytes(
                &bytes,
                &snapshot,
                &MatrixCache::new(),
                query.thresholds(),
                query.top_k as usize,
            )?;
            emit(&report)?;
            eprintln!(
                "{}: {} clone hits, {} bug hits, {} diagnostics, oov rate {:.4}",
                file.display(),
                report.clone_hits.values().map(Vec::len).sum::<usize>(),
                report.bug_hits.len(),
                report.diagnostics.len(),
                report.oov_rate
            );
        }
        Command::Serve {
            store,
            port,
            bind,
            max_source_bytes,
            query,
        } => {
            let snapshot = load_store(&store)?;
            let config = ServiceConfig {
                thresholds: query.thresholds(),
                top_k: query.top_k as usize,
                max_source_bytes,
                admin_token: std::env::var(api::ADMIN_TOKEN_ENV)
                    .ok()
                    .filter(|t| !t.is_empty()),
                store_dir: Some(store),
                ..ServiceConfig::default()
            };
            let state = AppState::new(CorpusStore::from_snapshot(snapshot), config);
            let runtime = tokio::runtime::Runtime::new().map_err(blocked)?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(bind, port))
                    .await
                    .map_err(|e| blocked(format!("bind {bind}:{port}: {e}")))?;
                eprintln!(
                    "listening on http://{}",
                    listener.local_addr().map_err(blocked)?
                );
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                api::serve(listener, state, shutdown).await.map_err(blocked)
            })?;
        }
        Command::Bench {
            rows,
            dim,
            queries,
            repeats,
            threshold,
            seed,
        } => {
            let cfg = BenchConfig {
                rows,
                dim: dim as usize,
                queries: queries as usize,
                repeats: repeats as usize,
                threshold,
                seed,
            };
            let results = bench::run(&cfg)?;
            print!("{}", bench::csv(&results));
            if let [naive, batch] = results.as_slice() {
                eprintln!(
                    "speedup {:.2}x",
                    naive.millis / batch.millis.max(f64::MIN_POSITIVE)
                );
            }
        }
        Command::Stats { store } => {
            let snapshot = load_store(&store)?;
            let stats =
                StatsResponse::new(snapshot.manifest(), Thresholds::default(), DEFAULT_TOP_K);
            emit(&stats)?;
            eprintln!(
                "version {}, {} sources, d={}, {} bugs",
                stats.manifest.version,
                stats.manifest.sources,
                stats.manifest.dim,
                stats.manifest.bugs
            );
        }
        Command::Parse {
            file,
            emit_ast: _,
            emit_stream,
        } => {
            let bytes =
                std::fs::read(&file).map_err(|e| blocked(format!("{}: {e}", file.display())))?;
            let text = String::from_utf8(bytes)
                .map_err(|e| blocked(format!("{}: {e}", file.display())))?;
            let diagnostics = match emit_stream {
                Some(g) => {
                    let ex = extract_fragments(&SourceUnit::new(
                        SourceId(1),
                        file.display().to_string(),
                        text,
                    ));
                    let mut out = std::io::stdout().lock();
                    for f in ex.fragments.iter().filter(|f| f.granularity == g) {
                        writeln!(out, "{}", f.stream.tokens().join(" ")).map_err(blocked)?;
                    }
                    ex.diagnostics
                }
                None => {
                    let (root, diagnostics) = parse_text(&text);
                    print!("{}", root.dump());
                    diagnostics
                }
            };
            for d in &diagnostics {
                eprintln!("{}:{}:{}: {}", file.display(), d.line, d.col, d.message);
            }
        }
    }
    Ok(())
}
