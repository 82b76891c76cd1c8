//! Building and incrementally extending a corpus from source providers.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::digest::Digest;
use crate::embedding::{embed_fragment, train_embeddings, FragmentEmbedding, Hyperparams};
use crate::error::{Error, Result};
use crate::frontend::{Diagnostic, Pos, SourceId, SourceUnit};
use crate::normalizer::{extract_fragments, Fragment, FragmentId, Granularity};
use crate::store::{AddOutcome, BugRecord, CorpusStore, Snapshot};

pub const DEFAULT_RETRAIN_ADVISORY: f64 = 0.05;

/// One enumerated source: its locator and either its bytes or a read error.
#[derive(Debug, Clone)]
pub struct ProvidedSource {
    pub path: String,
    pub content: std::result::Result<Vec<u8>, String>,
}

pub trait SourceProvider {
    /// Every source, in a deterministic order. Per-source read failures are
    /// reported inside the entries; `Err` means the provider itself is unusable.
    fn enumerate(&self) -> Result<Vec<ProvidedSource>>;
}

/// Files under a root directory whose name matches a glob, in lexicographic
/// path order.
#[derive(Debug, Clone)]
pub struct FsProvider {
    root: PathBuf,
    pattern: glob::Pattern,
}

impl FsProvider {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self::with_pattern(root, "*.sol").expect("default pattern is valid")
    }

    pub fn with_pattern(root: impl Into<PathBuf>, pattern: &str) -> Result<Self> {
        Ok(Self {
            root: root.into(),
            pattern: glob::Pattern::new(pattern)
                .map_err(|e| Error::Provider(format!("bad pattern '{pattern}': {e}")))?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl SourceProvider for FsProvider {
    fn enumerate(&self) -> Result<Vec<ProvidedSource>> {
        let mut out = Vec::new();
        for entry in WalkDir::new(&self.root).sort_by_file_name() {
            match entry {
                Ok(e) => {
                    if !e.file_type().is_file()
                        || !self.pattern.matches(&e.file_name().to_string_lossy())
                    {
                        continue;
                    }
                    let path = e.path().display().to_string();
                    let content = std::fs::read(e.path()).map_err(|err| err.to_string());
                    out.push(ProvidedSource { path, content });
                }
                Err(err) => {
                    let path = err.path().unwrap_or(&self.root).display().to_string();
                    out.push(ProvidedSource {
                        path,
                        content: Err(err.to_string()),
                    });
                }
            }
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }
}

/// Placeholder for fetching verified sources from a chain explorer. Not
/// implemented: enumeration always fails.
#[derive(Debug, Clone)]
pub struct RemoteChainProvider {
    pub endpoint: String,
}

impl SourceProvider for RemoteChainProvider {
    fn enumerate(&self) -> Result<Vec<ProvidedSource>> {
        Err(Error::Provider(format!(
            "remote chain fetching from {} is not implemented",
            self.endpoint
        )))
    }
}

/// In-memory provider, mostly for tests and the service.
#[derive(Debug, Clone, Default)]
pub struct MemoryProvider {
    pub sources: Vec<(String, String)>,
}

impl SourceProvider for MemoryProvider {
    fn enumerate(&self) -> Result<Vec<ProvidedSource>> {
        Ok(self
            .sources
            .iter()
            .map(|(p, t)| ProvidedSource {
                path: p.clone(),
                content: Ok(t.clone().into_bytes()),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSource {
    pub path: String,
    pub diagnostic: Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestDelta {
    pub added: usize,
    pub skipped_duplicates: usize,
    pub failed: Vec<FailedSource>,
    pub new_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUpdate {
    #[serde(flatten)]
    pub delta: IngestDelta,
    pub oov_rate: f64,
    pub retrain_advised: bool,
    pub retrain_advisory_threshold: f64,
}

fn failure(path: &str, message: impl Into<String>, at: Pos) -> FailedSource {
    FailedSource {
        path: path.to_string(),
        diagnostic: Diagnostic::error(message, at),
    }
}

/// Rewrites every id of a fragment list to belong to `id`.
fn rebase(fragments: &mut [Fragment], id: SourceId) {
    let fix = |f: FragmentId| FragmentId::new(id, f.ordinal);
    for f in fragments {
        f.fragment_id = fix(f.fragment_id);
        f.source_id = id;
        f.parent_id = f.parent_id.map(fix);
    }
}

struct Prepared {
    path: String,
    text: String,
    hash: Digest,
    result: std::result::Result<(Vec<Fragment>, Vec<FragmentEmbedding>), FailedSource>,
}

fn prepare(
    path: String,
    bytes: Vec<u8>,
    snapshot: &Snapshot,
) -> std::result::Result<Prepared, FailedSource> {
    let text = String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        let line = 1 + valid.iter().filter(|&&b| b == b'\n').count() as u32;
        failure(&path, "not valid UTF-8", Pos { line, col: 1 })
    })?;
    let hash = Digest::of_text(&text);
    let unit = SourceUnit {
        id: SourceId(0),
        path: path.clone(),
        text,
        content_hash: hash,
    };
    let ex = extract_fragments(&unit);
    let result = match ex.diagnostics.iter().find(|d| d.is_error()) {
        Some(d) if ex.fragments.is_empty() => Err(FailedSource {
            path: path.clone(),
            diagnostic: d.clone(),
        }),
        _ => {
            let vectors = ex
                .fragments
                .iter()
                .map(|f| embed_fragment(f, snapshot.table()))
                .collect();
            Ok((ex.fragments, vectors))
        }
    };
    Ok(Prepared {
        path,
        text: unit.text,
        hash,
        result,
    })
}

/// Parses, embeds with the store's frozen table and adds every new source as
/// one batch. Duplicate content is skipped; unreadable or unrecoverable files
/// are recorded in `failed`.
pub fn ingest(provider: &dyn SourceProvider, store: &CorpusStore) -> Result<IngestDelta> {
    update_model(provider, store, DEFAULT_RETRAIN_ADVISORY).map(|u| u.delta)
}

/// [`ingest`] plus the out-of-vocabulary rate of the batch, measured over the
/// contract streams of every readable source examined (duplicates included).
pub fn update_model(
    provider: &dyn SourceProvider,
    store: &CorpusStore,
    advisory_threshold: f64,
) -> Result<ModelUpdate> {
    let entries = provider.enumerate()?;
    let mut batch = store.begin();
    let snapshot = batch.pending().clone();
    let prepared: Vec<std::result::Result<Prepared, FailedSource>> = entries
        .into_par_iter()
        .map(|e| match e.content {
            Ok(bytes) => prepare(e.path, bytes, &snapshot),
            Err(msg) => Err(failure(&e.path, msg, Pos { line: 1, col: 1 })),
        })
        .collect();

    let mut delta = IngestDelta {
        added: 0,
        skipped_duplicates: 0,
        failed: Vec::new(),
        new_version: 0,
    };
    let (mut oov, mut total) = (0usize, 0usize);
    for p in prepared {
        let p = match p {
            Ok(p) => p,
            Err(f) => {
                delta.failed.push(f);
                continue;
            }
        };
        let (mut fragments, vectors) = match p.result {
            Ok(r) => r,
            Err(f) => {
                delta.failed.push(f);
                continue;
            }
        };
        for (f, v) in fragments.iter().zip(&vectors) {
            if f.granularity == Granularity::Contract {
                oov += v.oov_count;
                total += v.token_count;
            }
        }
        let id = batch.pending().next_source_id();
        rebase(&mut fragments, id);
        let unit = SourceUnit {
            id,
            path: p.path,
            text: p.text,
            content_hash: p.hash,
        };
        match batch.add_contract(&unit, fragments, vectors)? {
            AddOutcome::Added { .. } => delta.added += 1,
            AddOutcome::Duplicate { .. } => delta.skipped_duplicates += 1,
        }
    }
    delta.new_version = batch.commit();
    let oov_rate = if total == 0 {
        0.0
    } else {
        oov as f64 / total as f64
    };
    Ok(ModelUpdate {
        delta,
        oov_rate,
        retrain_advised: oov_rate > advisory_threshold,
        retrain_advisory_threshold: advisory_threshold,
    })
}

/// Bug records the embedding table could not represent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedBug {
    pub bug_id: String,
    pub reason: String,
}

/// Adds bug records one by one, collecting rejections instead of failing.
pub fn add_bugs(store: &CorpusStore, records: Vec<BugRecord>) -> (usize, Vec<RejectedBug>) {
    let mut batch = store.begin();
    let mut added = 0;
    let mut rejected = Vec::new();
    for r in records {
        let bug_id = r.bug_id.clone();
        match batch.add_bug(r) {
            Ok(_) => added += 1,
            Err(e) => rejected.push(RejectedBug {
                bug_id,
                reason: e.to_string(),
            }),
        }
    }
    batch.commit();
    (added, rejected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    #[serde(flatten)]
    pub delta: IngestDelta,
    pub vocabulary: usize,
    pub dim: usize,
    pub bugs_added: usize,
    pub bugs_rejected: Vec<RejectedBug>,
}

fn contract_streams(sources: &[(String, String)]) -> Vec<crate::normalizer::TokenStream> {
    sources
        .par_iter()
        .flat_map_iter(|(path, text)| {
            extract_fragments(&SourceUnit::new(SourceId(0), path.as_str(), text.as_str()))
                .fragments
                .into_iter()
                .filter(|f| f.granularity == Granularity::Contract)
                .map(|f| f.stream)
        })
        .collect()
}

fn readable(provider: &dyn SourceProvider) -> Result<Vec<(String, String)>> {
    Ok(provider
        .enumerate()?
        .into_iter()
        .filter_map(|s| {
            let text = String::from_utf8(s.content.ok()?).ok()?;
            Some((s.path, text))
        })
        .collect())
}

/// Trains a table on the provider's contract streams, then builds a store
/// holding every source and the given bug records.
pub fn build_store(
    provider: &dyn SourceProvider,
    hp: &Hyperparams,
    categories: Vec<String>,
    bugs: Vec<BugRecord>,
) -> Result<(CorpusStore, TrainSummary)> {
    let sources = readable(provider)?;
    let streams = contract_streams(&sources);
    let table = train_embeddings(&streams, hp)?;
    let store = CorpusStore::new(table, categories);
    let delta = ingest(provider, &store)?;
    let (bugs_added, bugs_rejected) = add_bugs(&store, bugs);
    let snap = store.snapshot();
    let summary = TrainSummary {
        delta: IngestDelta {
            new_version: snap.version(),
            ..delta
        },
        vocabulary: snap.table().len(),
        dim: snap.dim(),
        bugs_added,
        bugs_rejected,
    };
    Ok((store, summary))
}

/// Retrains the table on every stored source and re-embeds the whole corpus
/// and bug database, publishing the result as the next version.
pub fn retrain(store: &CorpusStore, hp: &Hyperparams) -> Result<TrainSummary> {
    let current = store.snapshot();
    let sources: Vec<(String, String)> = current
        .sources()
        .iter()
        .map(|s| (s.path.clone(), s.text.clone()))
        .collect();
    let table = train_embeddings(&contract_streams(&sources), hp)?;
    let fresh = CorpusStore::new(table, current.categories().to_vec());
    let delta = ingest(&MemoryProvider { sources }, &fresh)?;
    let (bugs_added, bugs_rejected) = add_bugs(&fresh, current.bugs().to_vec());
    let rebuilt = (*fresh.snapshot()).clone();
    let summary = TrainSummary {
        delta: IngestDelta {
            new_version: 0,
            ..delta
        },
        vocabulary: rebuilt.table().len(),
        dim: rebuilt.dim(),
        bugs_added,
        bugs_rejected,
    };
    let version = store.replace(rebuilt);
    Ok(TrainSummary {
        delta: IngestDelta {
            new_version: version,
            ..summary.delta
        },
        ..summary
    })
}
